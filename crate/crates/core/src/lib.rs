pub mod autodiff;
pub mod cli;
pub mod eval;
pub mod fsutil;
pub mod mesh;
pub mod flow;
pub mod latent;
pub mod rng;
pub mod ssm;
pub mod synth;
