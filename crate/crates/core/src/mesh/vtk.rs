//! Legacy VTK ASCII unstructured-grid snapshots. Each spectral element is
//! split into N^d linear quads/hexahedra through its GLL nodes.

use std::io::Write;

use super::Mesh;

const VTK_QUAD: u8 = 9;
const VTK_HEXAHEDRON: u8 = 12;

/// Write a snapshot. Vector fields are component-major (`[a * nglobal + g]`),
/// scalars have one value per global node.
pub fn write_vtk<W: Write>(
    out: &mut W,
    mesh: &Mesh,
    title: &str,
    vectors: &[(&str, &[f64])],
    scalars: &[(&str, &[f64])],
) -> std::io::Result<()> {
    let dim = mesh.dim();
    let r = &mesh.reference;
    let n = r.order;
    let ng = mesh.nglobal();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {ng} double")?;
    for g in 0..ng {
        let x = mesh.node(g);
        writeln!(out, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2])?;
    }
    let sub = n.pow(dim as u32);
    let ncells = mesh.num_elements() * sub;
    let nv = 1usize << dim;
    writeln!(out, "CELLS {} {}", ncells, ncells * (nv + 1))?;
    // VTK vertex order: counterclockwise in the base, then the lid.
    let order: &[[usize; 3]] = if dim == 2 {
        &[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    } else {
        &[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
    };
    let npe = r.npe();
    let kmax = if dim == 3 { n } else { 1 };
    for e in 0..mesh.num_elements() {
        let ids = &mesh.numbering.l2g[e * npe..(e + 1) * npe];
        for k in 0..kmax {
            for j in 0..n {
                for i in 0..n {
                    write!(out, "{nv}")?;
                    for o in order {
                        let l = r.shape_v.ravel([i + o[0], j + o[1], if dim == 3 { k + o[2] } else { 0 }]);
                        write!(out, " {}", ids[l])?;
                    }
                    writeln!(out)?;
                }
            }
        }
    }
    writeln!(out, "CELL_TYPES {ncells}")?;
    let ct = if dim == 2 { VTK_QUAD } else { VTK_HEXAHEDRON };
    for _ in 0..ncells {
        writeln!(out, "{ct}")?;
    }
    if vectors.is_empty() && scalars.is_empty() {
        return Ok(());
    }
    writeln!(out, "POINT_DATA {ng}")?;
    for (name, v) in vectors {
        writeln!(out, "VECTORS {name} double")?;
        for g in 0..ng {
            let c = |a: usize| if a < dim { v[a * ng + g] } else { 0.0 };
            writeln!(out, "{:.16e} {:.16e} {:.16e}", c(0), c(1), c(2))?;
        }
    }
    for (name, s) in scalars {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for val in s.iter().take(ng) {
            writeln!(out, "{val:.16e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;

    #[test]
    fn cell_and_point_counts() {
        let mesh = build_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[2, 1], 3, 2).unwrap();
        let u = vec![0.5; 2 * mesh.nglobal()];
        let mut buf = Vec::new();
        write_vtk(&mut buf, &mesh, "t", &[("u", &u)], &[]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains(&format!("POINTS {} double", 7 * 4)));
        assert!(s.contains("CELLS 18 90"));
        assert!(s.contains("VECTORS u double"));
    }
}
