//! Small economies whose allocations can be checked by hand.
//!
//! `pair2` is a two-industry loop, `chain3` a single supplier feeding two
//! downstream customers. Both appear throughout the tests and the README.

use ndarray::{array, Array1};

use crate::economy::Economy;
use crate::shocks::{Constraints, ShockScenario};

pub fn pair2() -> Economy {
    Economy::build(array![[0.0, 2.0], [3.0, 0.0]], array![8.0, 5.0]).expect("valid fixture")
}

/// Ceilings `x^max = [10, 4]`, `f^max = [8, 5]`: industry 2 loses half its capacity.
pub fn pair2_constraints() -> Constraints {
    Constraints {
        x_max: array![10.0, 4.0],
        f_max: array![8.0, 5.0],
    }
}

/// Scenario producing [`pair2_constraints`] through `make_constraints`.
pub fn pair2_scenario() -> ShockScenario {
    ShockScenario::new(array![0.0, 0.5], array![0.0, 0.0]).expect("valid fixture")
}

pub fn chain3() -> Economy {
    Economy::build(
        array![[0.0, 4.0, 2.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        array![4.0, 6.0, 8.0],
    )
    .expect("valid fixture")
}

/// Halves the upstream supplier's capacity: `x^max = [5, 6, 8]`, `f^max = f0`.
pub fn chain3_scenario() -> ShockScenario {
    ShockScenario::new(array![0.5, 0.0, 0.0], Array1::zeros(3)).expect("valid fixture")
}
