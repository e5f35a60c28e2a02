// SPDX-License-Identifier: Apache-2.0

pub mod cost;
pub mod netlist;
pub mod pdn;
pub mod tier;
pub mod timing;
