// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use stack3d::netlist::{parse_netlist, serialize_netlist};

// Anything that parses must serialize to text that parses to the same netlist.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(nl) = parse_netlist(text) else { return };
    let again = parse_netlist(&serialize_netlist(&nl)).expect("serialized netlist must parse");
    assert_eq!(nl, again);
});
