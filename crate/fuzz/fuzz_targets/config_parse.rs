// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use stack3d_cli::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = Config::parse(text) else { return };
    // the canonical form is a fixed point and keeps the hash
    let again = Config::parse(&cfg.canonical()).expect("canonical form must parse");
    assert_eq!(cfg.canonical(), again.canonical());
    assert_eq!(cfg.hash("fuzz", b""), again.hash("fuzz", b""));
});
