//! Keldysh-ordered cumulants and quantum bispectra of photon-number shot noise in a
//! driven-damped cavity mode.

pub mod analytic;
pub mod check;
pub mod error;
pub mod langevin;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod phase_space;
pub mod quadrature;
pub mod scalar;
pub mod spectroscopy;

pub use error::{Error, Result};
pub use scalar::{Complex, Real};

/// Double-precision aliases.
pub mod f64 {
    pub type CavityParams = crate::model::CavityParams<f64>;
    pub type SqueezedBathParams = crate::model::SqueezedBathParams<f64>;
    pub type FreqGrid2D = crate::model::FreqGrid2D<f64>;
    pub type FreqTriple = crate::analytic::FreqTriple<f64>;
    pub type BispectrumSurface = crate::model::BispectrumSurface<f64>;
    pub type FilterSpec = crate::model::FilterSpec<f64>;
    pub type FockWorkspace = crate::lindblad::FockWorkspace<f64>;
    pub type SdeConfig = crate::langevin::SdeConfig<f64>;
    pub type Complex = crate::scalar::Complex<f64>;
}

/// Single-precision aliases.
pub mod f32 {
    pub type CavityParams = crate::model::CavityParams<f32>;
    pub type SqueezedBathParams = crate::model::SqueezedBathParams<f32>;
    pub type FreqGrid2D = crate::model::FreqGrid2D<f32>;
    pub type FreqTriple = crate::analytic::FreqTriple<f32>;
    pub type BispectrumSurface = crate::model::BispectrumSurface<f32>;
    pub type FilterSpec = crate::model::FilterSpec<f32>;
    pub type FockWorkspace = crate::lindblad::FockWorkspace<f32>;
    pub type SdeConfig = crate::langevin::SdeConfig<f32>;
    pub type Complex = crate::scalar::Complex<f32>;
}
