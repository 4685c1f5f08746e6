//! Built-in demo scenarios.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::scenario::Scenario;

pub struct Demo {
    pub name: &'static str,
    pub summary: &'static str,
    pub source: &'static str,
}

macro_rules! demo {
    ($name:literal, $summary:literal) => {
        Demo {
            name: $name,
            summary: $summary,
            source: include_str!(concat!("../demos/", $name, ".json")),
        }
    };
}

pub const DEMOS: &[Demo] = &[
    demo!("collinear-formation", "triangle formation from a collinear start stays collinear"),
    demo!("noncollinear-formation", "triangle formation from a generic start stays planar"),
    demo!("consensus-basic", "undirected cycle consensus keeps rank and column span"),
    demo!("grassmann-rotation", "rotating drift keeps rank but not the column span"),
    demo!("theorem2-violation", "a coupling outside the rank-preserving form raises the rank"),
    demo!("signature-symmetric", "congruence flow keeps the signature of a symmetric state"),
    demo!("timevarying-couplings", "sinusoidally modulated weighted consensus"),
];

pub fn find(name: &str) -> Option<&'static Demo> {
    DEMOS.iter().find(|d| d.name == name)
}

pub fn scenario(name: &str) -> Result<Scenario> {
    let demo = find(name).ok_or_else(|| {
        let names: Vec<&str> = DEMOS.iter().map(|d| d.name).collect();
        CliError::input(format!("unknown demo `{name}` (available: {})", names.join(", ")))
    })?;
    Scenario::from_json(demo.source, Path::new(demo.name))
}
