//! The hand-written policy programs shipped with the crate.

use crate::config::{CupColor, TaskId, TaskSetup};

use super::{parse_program, PlannerProgram};

pub const SWAP_CUPS: &str = include_str!("../../plans/swap_cups.plan");
pub const SWAP_CUPS_BLUE: &str = include_str!("../../plans/swap_cups_blue.plan");
pub const PNP_TWICE: &str = include_str!("../../plans/pnp_twice.plan");
pub const PLACE_AND_STACK: &str = include_str!("../../plans/place_and_stack.plan");

/// (file name, source) for every corpus program.
pub const ALL: [(&str, &str); 4] = [
    ("swap_cups.plan", SWAP_CUPS),
    ("swap_cups_blue.plan", SWAP_CUPS_BLUE),
    ("pnp_twice.plan", PNP_TWICE),
    ("place_and_stack.plan", PLACE_AND_STACK),
];

/// Source text of the program for a task variant, if one ships.
pub fn source_for(setup: TaskSetup) -> Option<&'static str> {
    match (setup.task, setup.first_cup) {
        (TaskId::SwapCups, CupColor::Black) => Some(SWAP_CUPS),
        (TaskId::SwapCups, CupColor::Blue) => Some(SWAP_CUPS_BLUE),
        (TaskId::PnpTwice, _) => Some(PNP_TWICE),
        (TaskId::PlaceAndStack, _) => Some(PLACE_AND_STACK),
        (TaskId::Custom, _) => None,
    }
}

pub fn program_for(setup: TaskSetup) -> Option<PlannerProgram> {
    source_for(setup).map(|s| parse_program(s).expect("corpus programs parse"))
}
