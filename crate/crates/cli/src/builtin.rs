//! Configs shipped with the binary, addressed by example id.

pub struct Example {
    pub id: &'static str,
    pub name: &'static str,
    pub config: &'static str,
}

pub const EXAMPLES: &[Example] = &[
    Example {
        id: "5.1",
        name: "gain_schur",
        config: include_str!("../configs/gain_schur.json"),
    },
    Example {
        id: "5.2",
        name: "ellipse_plane",
        config: include_str!("../configs/ellipse_plane.json"),
    },
    Example {
        id: "5.3.1",
        name: "abs_cubic",
        config: include_str!("../configs/abs_cubic.json"),
    },
    Example {
        id: "5.3.2",
        name: "shrinking_box",
        config: include_str!("../configs/shrinking_box.json"),
    },
    Example {
        id: "5.3.3",
        name: "laplace_box",
        config: include_str!("../configs/laplace_box.json"),
    },
    Example {
        id: "5.3.4",
        name: "worst_q",
        config: include_str!("../configs/worst_q.json"),
    },
];

/// Scenario variant of `ellipse_plane`.
pub const ELLIPSE_PLANE_SCENARIO: &str = include_str!("../configs/ellipse_plane_scenario.json");

pub fn find(id: &str) -> Option<&'static Example> {
    EXAMPLES.iter().find(|e| e.id == id || e.name == id)
}
