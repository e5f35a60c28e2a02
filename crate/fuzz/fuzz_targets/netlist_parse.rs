// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use stack3d::netlist::parse_netlist;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(nl) = parse_netlist(text) {
            assert!(nl.num_cells() >= 1);
            for n in nl.nets() {
                assert!(n.pins.len() >= 2);
                assert!(n.pins.iter().all(|&p| p < nl.num_cells()));
            }
        }
    }
});
