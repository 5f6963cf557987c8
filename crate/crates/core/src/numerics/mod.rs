//! Numeric kernel: distribution functions, root finding, quadrature and a
//! reproducible generator.

pub mod normal;
pub mod quad;
pub mod rng;
pub mod root;
pub mod student_t;

pub use normal::{norm_cdf, norm_isf, norm_pdf, norm_quantile, norm_sf};
pub use quad::{integrate, integrate_interval, integrate_unit};
pub use rng::Rng;
pub use root::{find_root, grow_upper_bracket};
pub use student_t::{t_cdf, t_density};
