//! Physical constants (SI, CODATA 2018).

pub const HBAR: f64 = 1.054_571_817e-34;
pub const H_PLANCK: f64 = 6.626_070_15e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const MU_B: f64 = 9.274_010_078_3e-24;
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Cs-133 clock transition.
pub const NU_CLOCK_CS: f64 = 9_192_631_770.0;
pub const CS_MASS: f64 = 132.905_451_961 * AMU;
