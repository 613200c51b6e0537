use std::f64::consts::PI;

use crate::error::{Result, SemError};

use super::transfinite::{gordon_hall, multilinear};
use super::Mesh;

/// Which form of the vertical displacement to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SineVariant {
    /// y' = y + a sin^2(pi y)
    #[default]
    Printed,
    /// y' = y + a sin(pi x) sin(pi y)
    Symmetric,
}

pub fn sine_map(x: [f64; 3], alpha: f64, variant: SineVariant) -> [f64; 3] {
    let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
    let dy = match variant {
        SineVariant::Printed => sy * sy,
        SineVariant::Symmetric => sx * sy,
    };
    [x[0] + alpha * sx * sy, x[1] + alpha * dy, x[2]]
}

fn check_2d(mesh: &Mesh) -> Result<()> {
    if mesh.dim() != 2 {
        return Err(SemError::InvalidMesh("sine deformation is two-dimensional".into()));
    }
    Ok(())
}

/// Apply the sine map to every geometry node. The result becomes the
/// reference configuration.
pub fn sine_deform(mesh: &Mesh, alpha: f64, variant: SineVariant) -> Result<Mesh> {
    check_2d(mesh)?;
    let mut out = mesh.clone();
    out.map_nodes(|x| sine_map(x, alpha, variant));
    out.reset_reference();
    Ok(out)
}

/// Apply the sine map inside elements only: the displacement is reduced by
/// its transfinite interpolant from the element edges, so every element edge
/// stays where it was. Elements must be straight-sided on input.
pub fn sine_deform_interior(mesh: &Mesh, alpha: f64, variant: SineVariant) -> Result<Mesh> {
    check_2d(mesh)?;
    let r = mesh.reference.clone();
    let n = r.order;
    let npe = r.npe();
    let mut coords = mesh.coords().to_vec();
    for e in 0..mesh.num_elements() {
        let el = mesh.element(e);
        let disp = |xi: [f64; 3]| {
            let x = multilinear(2, &el.vertices, xi);
            let y = sine_map(x, alpha, variant);
            [y[0] - x[0], y[1] - x[1], 0.0]
        };
        let edge = |_f: usize, xi: [f64; 3]| disp(xi);
        for l in 0..npe {
            let [i, j, _] = r.shape_v.unravel(l);
            if i == 0 || j == 0 || i == n || j == n {
                continue;
            }
            let xi = r.node_xi(l);
            let d = disp(xi);
            let gh = gordon_hall(2, &edge, xi);
            let g = mesh.numbering.l2g[e * npe + l];
            for a in 0..2 {
                coords[a][g] = el.nodes[l][a] + d[a] - gh[a];
            }
        }
    }
    let mut out = mesh.clone();
    out.set_coords(coords);
    out.reset_reference();
    Ok(out)
}
