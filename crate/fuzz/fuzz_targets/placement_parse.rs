// SPDX-License-Identifier: Apache-2.0
#![no_main]

use std::collections::HashSet;

use libfuzzer_sys::fuzz_target;
use stack3d::netlist::PlacementFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = PlacementFile::parse(text) else { return };
    let mut seen = HashSet::new();
    for (id, loc) in &file.entries {
        assert!(seen.insert(id.as_str()), "duplicate `{id}` accepted");
        assert!(loc.x.is_finite() && loc.y.is_finite());
    }
});
