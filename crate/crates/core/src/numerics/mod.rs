//! Dense linear algebra and small convex solvers.

pub mod conic;
pub mod linalg;
pub mod lp;
pub mod lyapunov;
pub mod qp;
pub mod sdp;

pub use conic::{solve_conic, ConicOptions, ConicProblem, ConicSolution, ConicStatus, LmiBlock};
pub use linalg::{expm, solve_lstsq, spectral_norm, spectral_radius, LstsqSolution};
pub use lp::{lp_maximize, solve_lp_feasibility, LpFeasibility, LpMax};
pub use lyapunov::{lyapunov_residual, solve_discrete_lyapunov};
pub use qp::{solve_qp, QpOptions, QpProblem, QpSolution, QpStatus};
pub use sdp::{lmi_slacks, sdp_max_min_eig, SdpOutcome, SdpSolution, EPS_PD_DEFAULT};
