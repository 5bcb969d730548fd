//! Nonnegative forms versus sums of squares in the two minimal cases.
//!
//! A real form (homogeneous polynomial) that is a sum of squares is
//! nonnegative, and in most (n, degree) pairs the converse fails.  The
//! smallest failures are ternary sextics (3 variables, degree 6) and
//! quaternary quartics (4 variables, degree 4).  In both, the gap is
//! governed by the same algebraic mechanism: degree-d forms cut out
//! complete intersections of s = d^(n-1) points, and the values of
//! degree-d forms at those points satisfy exactly one linear relation
//! (a Cayley-Bacharach relation).  That single relation produces
//! linear functionals that are nonnegative on every square but
//! negative on some nonnegative form.
//!
//! The crate builds this machinery end to end:
//!
//! * [`forms`]: sparse homogeneous forms, monomial bases, evaluation at
//!   complex projective points.
//! * [`numerics`]: the small dense kernels everything rests on (Jacobi
//!   eigendecomposition, nullspaces, sphere minimization, damped Newton).
//! * [`varieties`]: complete intersections of the defining forms and
//!   extraction of the Cayley-Bacharach relation on their points.
//! * [`extremal`]: moment functionals supported on the intersection,
//!   extreme rays of the dual cone to the sums of squares, the rank
//!   dichotomy, and point-evaluation recovery from rank-1 functionals.
//! * [`certify`]: nonnegative-but-not-sos witnesses, separation
//!   certificates, and an independent alternating-projection SOS check.
//! * [`tcone`]: the image of the squares under evaluation at the
//!   intersection points, which is exactly the cone
//!   `{ x >= 0 : sum_i sqrt(x_i) >= 2 sqrt(x_k) for all k }`,
//!   plus lifts of positive value vectors to nonnegative forms.
//!
//! Heavy inner loops (Newton start sweeps, sphere-minimization restarts,
//! conjecture-scan trials) run data-parallel under the default
//! `parallel` feature and sequentially without it; results are identical
//! either way because every per-item computation draws from its own
//! seeded generator stream and merges are order-independent.

pub mod certify;
pub mod error;
pub mod extremal;
pub mod forms;
pub mod numerics;
pub mod par;
pub mod tcone;
pub mod varieties;

pub use error::{Error, Result};
