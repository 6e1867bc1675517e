pub mod assess;
pub mod calibrate;
pub mod eval;
pub mod synth;
