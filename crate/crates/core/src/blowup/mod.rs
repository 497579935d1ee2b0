//! Real-projective blow-ups along saturated centers, lifted actions and the
//! iterated desingularization driver.

mod atlas;
mod driver;
mod lifted;

pub use atlas::{argmax_abs, Blown, BlowupCenter, BlownUpManifold, Chart, ChartPoint, Stage};
pub use driver::{
    default_tube_radius, desingularize, exceptional_leaf_check, is_regular, DesingularizationResult, DesingularizeOptions,
    ExceptionalLeafReport, RegularityReport,
};

use crate::actions::LinearOrthogonalAction;
use crate::error::Result;

/// Blows up the base along one center.
pub fn blow_up(
    action: &LinearOrthogonalAction,
    radius: f64,
    center: BlowupCenter,
    rho: f64,
) -> Result<BlownUpManifold> {
    BlownUpManifold::base(action, radius).blow_up(vec![center], rho)
}
