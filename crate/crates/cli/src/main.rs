// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(stack3d_cli::run(std::env::args_os()));
}
