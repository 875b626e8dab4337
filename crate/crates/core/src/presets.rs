//! Standard connections and paths shared by the acceptance suite and the CLI.

use crate::connection::{Chart, ConnectionForm, PolynomialTerm};
use crate::error::Result;
use crate::matcore::EndMap;
use crate::transport::Path;

/// `A_x = [[0.3, −0.8], [0.5, −0.1]]`, `A_y = [[−0.2, 0.4], [0.9, 0.6]]` on `ℝ²`.
pub fn constant() -> Result<ConnectionForm> {
    ConnectionForm::constant(
        Chart::new(2)?,
        vec![
            EndMap::from_rows(&[vec![0.3, -0.8], vec![0.5, -0.1]])?,
            EndMap::from_rows(&[vec![-0.2, 0.4], vec![0.9, 0.6]])?,
        ],
    )
}

/// A rank-2 connection on `ℝ²` with quadratic, non-commuting coefficients.
pub fn polynomial() -> Result<ConnectionForm> {
    let m = |rows: [[f64; 2]; 2]| EndMap::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]);
    let term = |component, exponents: [u32; 2], coefficient| PolynomialTerm {
        component,
        exponents: exponents.to_vec(),
        coefficient,
    };
    ConnectionForm::polynomial(
        Chart::new(2)?,
        2,
        vec![
            term(0, [0, 0], m([[0.1, -0.5], [0.5, 0.0]])?),
            term(0, [1, 0], m([[0.0, 0.3], [-0.2, 0.4]])?),
            term(0, [0, 2], m([[0.7, 0.0], [0.1, -0.3]])?),
            term(1, [0, 1], m([[0.2, -0.6], [0.6, 0.1]])?),
            term(1, [1, 1], m([[-0.4, 0.2], [0.0, 0.5]])?),
            term(1, [2, 0], m([[0.0, 0.9], [-0.9, 0.0]])?),
        ],
    )
}

/// Named connections on `ℝ²`: zero (rank 2), constant, magnetic (rank 1,
/// strength 1), Levi-Civita of the sphere, polynomial.
pub fn standard_connections() -> Result<Vec<(&'static str, ConnectionForm)>> {
    Ok(vec![
        ("zero", ConnectionForm::zero(Chart::new(2)?, 2)?),
        ("constant", constant()?),
        ("magnetic", ConnectionForm::magnetic(1.0)?),
        ("levi-civita", ConnectionForm::levi_civita_sphere()),
        ("polynomial", polynomial()?),
    ])
}

/// A C¹ spline through four waypoints of `[−1, 1]²`, over `[0, 1]`.
pub fn test_spline() -> Result<Path> {
    Path::spline(
        vec![vec![-0.5, -0.3], vec![0.1, 0.4], vec![0.6, 0.0], vec![0.3, -0.5]],
        (0.0, 1.0),
    )
}

/// The arc used for convergence runs: not closed and not centred at the
/// origin, so the magnetic integrand varies along it.
pub fn convergence_arc() -> Result<Path> {
    Path::planar_arc([0.5, 0.2], 1.0, (0.0, 2.0))
}
