//! Built-in problem instances.

pub mod checks;
pub mod multiloss;
pub mod portfolio;
pub mod synthetic;

use crate::linalg::Vector;
use crate::model::CompositeProblem;

pub use multiloss::{
    multiloss_oracle, multiloss_smooth_oracle, synthetic_multiloss_instance, MultiLossInstance, MultiLossOracle,
};
pub use portfolio::{portfolio_oracle, synthetic_returns, PortfolioInstance, PortfolioOracle};
pub use synthetic::synthetic_oracles;

/// A problem together with a starting point and the region on which its
/// documented constants hold.
#[derive(Debug, Clone)]
pub struct BuiltinProblem {
    pub name: String,
    pub problem: CompositeProblem,
    pub x0: Vector,
    pub stationary: Option<Vector>,
    /// Constants are valid on the box of this half-width around the origin;
    /// `None` means globally.
    pub radius: Option<f64>,
}

/// Synthetic toys plus small multiloss and portfolio instances.
pub fn builtin_problems() -> Vec<BuiltinProblem> {
    let mut out = synthetic_oracles();
    let inst = synthetic_multiloss_instance(60, 5, 0.01, 21);
    out.push(BuiltinProblem {
        name: "multiloss".into(),
        problem: multiloss_oracle(&inst).expect("valid instance"),
        x0: Vector::zeros(5),
        stationary: None,
        radius: None,
    });
    let (problem, radius) = multiloss_smooth_oracle(&inst).expect("valid instance");
    out.push(BuiltinProblem {
        name: "multiloss-smooth".into(),
        problem,
        x0: Vector::zeros(5),
        stationary: None,
        radius: Some(radius),
    });
    let port = PortfolioInstance {
        returns: synthetic_returns(40, 4, 5),
        cvar_beta: 0.1,
        rho: 2.0,
        gamma: 0.05,
    };
    out.push(BuiltinProblem {
        name: "portfolio".into(),
        problem: portfolio_oracle(&port).expect("valid instance"),
        x0: port.initial_point(),
        stationary: None,
        radius: None,
    });
    out
}
