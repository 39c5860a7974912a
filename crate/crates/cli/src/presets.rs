//! Experiment presets shipped with the binary. Each reproduces one figure's
//! sweep at desk scale; `smoke` is a seconds-long plumbing check.

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub content: &'static str,
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "fig2",
        description: "Bernoulli-Gaussian MSE sweep over beta: linear, lasso, zero-norm, posterior-mean curves plus desk-scale Monte Carlo",
        content: include_str!("../presets/fig2.json"),
    },
    Preset {
        name: "fig3",
        description: "SE distribution concentration: lasso CDFs at n=100 vs n=500, beta in {1,2}",
        content: include_str!("../presets/fig3.json"),
    },
    Preset {
        name: "fig4",
        description: "Three-point prior with 10 dB power spread: constant / unknown / known power scenarios",
        content: include_str!("../presets/fig4.json"),
    },
    Preset {
        name: "fig5",
        description: "Support recovery misdetection with optimized thresholds: linear vs lasso pipelines",
        content: include_str!("../presets/fig5.json"),
    },
    Preset {
        name: "smoke",
        description: "Tiny end-to-end check (n=16, 4 trials)",
        content: include_str!("../presets/smoke.json"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
