//! Linear transforms used by the solver: 2-D FFT, forward-difference
//! gradient with its adjoint, one level of the CDF 9/7 wavelet, and the
//! discrete curvelet transform.

pub mod curvelet;
pub mod fft;
pub mod grad;
pub mod wavelet;

pub use curvelet::{curvelet_adjoint, curvelet_forward, CurveletCoeffs, CurveletGeometry};
pub use fft::{fft2, ifft2, ComplexImage, Fft2};
pub use grad::{div_backward, grad_forward};
pub use wavelet::{dwt97_level1, idwt97_level1, Dwt97Bands};
