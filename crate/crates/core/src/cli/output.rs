//! Field, trace and VTK writers.
//!
//! Fields are written per triangle: `triangle,x,y,<values>` with `(x, y)`
//! the centroid. Computed and reference fields share the layout.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::femspace::{CellField, CellVecField};
use crate::mesh::TriMesh;
use crate::solver::{IterRecord, StepRecord};

pub fn scalar_csv(mesh: &TriMesh, name: &str, v: &CellField) -> String {
    let mut s = format!("triangle,x,y,{name}\n");
    for (t, val) in v.0.iter().enumerate() {
        let c = mesh.centroids[t];
        let _ = writeln!(s, "{t},{},{},{val}", c[0], c[1]);
    }
    s
}

pub fn vector_csv(mesh: &TriMesh, name: &str, v: &CellVecField) -> String {
    let mut s = format!("triangle,x,y,{name}_x,{name}_y\n");
    for (t, val) in v.0.iter().enumerate() {
        let c = mesh.centroids[t];
        let _ = writeln!(s, "{t},{},{},{},{}", c[0], c[1], val[0], val[1]);
    }
    s
}

/// One line of `trace.jsonl`.
#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceLine<'a> {
    Iter(&'a IterRecord),
    Step(&'a StepRecord),
}

/// Iterations of each step followed by that step's summary.
pub fn trace_jsonl(iters: &[IterRecord], steps: &[StepRecord]) -> String {
    let mut s = String::new();
    let mut line = |l: TraceLine<'_>| {
        s.push_str(&serde_json::to_string(&l).expect("trace records serialize"));
        s.push('\n');
    };
    let mut k = 0;
    for st in steps {
        while k < iters.len() && iters[k].step <= st.step {
            line(TraceLine::Iter(&iters[k]));
            k += 1;
        }
        line(TraceLine::Step(st));
    }
    for it in &iters[k..] {
        line(TraceLine::Iter(it));
    }
    s
}

pub enum VtkData<'a> {
    Scalar(&'a str, &'a CellField),
    Vector(&'a str, &'a CellVecField),
}

/// Legacy ASCII unstructured grid with cell data.
pub fn vtk(mesh: &TriMesh, title: &str, data: &[VtkData<'_>]) -> String {
    let nt = mesh.n_triangles();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {nt}");
    for d in data {
        match d {
            VtkData::Scalar(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in &v.0 {
                    let _ = writeln!(s, "{x}");
                }
            }
            VtkData::Vector(name, v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in &v.0 {
                    let _ = writeln!(s, "{} {} 0", x[0], x[1]);
                }
            }
        }
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}
