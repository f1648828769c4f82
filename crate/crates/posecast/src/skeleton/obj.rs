//! ASCII Wavefront OBJ export with one `g` group per body part.

use crate::num::Real;

use super::mesh::{BodyPart, TriMesh};

/// Serialize a mesh as ASCII OBJ: `v` lines, `vt` lines when the mesh has
/// texture coordinates, then one `g` group per part label (fixed order)
/// with 1-based `f` lines. Output is deterministic for a given mesh.
pub fn export_obj<T: Real>(mesh: &TriMesh<T>) -> Vec<u8> {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!(
            "v {:.6} {:.6} {:.6}\n",
            v.x.as_f64(),
            v.y.as_f64(),
            v.z.as_f64()
        ));
    }
    let has_uv = mesh.uv.is_some();
    if let Some(uv) = &mesh.uv {
        for t in uv {
            out.push_str(&format!("vt {:.6} {:.6}\n", t[0].as_f64(), t[1].as_f64()));
        }
    }
    for part in BodyPart::ALL {
        let tris: Vec<&[u32; 3]> = mesh
            .triangles
            .iter()
            .zip(&mesh.parts)
            .filter(|(_, p)| **p == part)
            .map(|(t, _)| t)
            .collect();
        if tris.is_empty() {
            continue;
        }
        out.push_str(&format!("g {}\n", part.group_name()));
        for t in tris {
            if has_uv {
                out.push_str(&format!(
                    "f {}/{} {}/{} {}/{}\n",
                    t[0] + 1,
                    t[0] + 1,
                    t[1] + 1,
                    t[1] + 1,
                    t[2] + 1,
                    t[2] + 1
                ));
            } else {
                out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
            }
        }
    }
    out.into_bytes()
}
