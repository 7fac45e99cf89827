//! Run outputs: diagnostics CSV, legacy VTK snapshots and the JSON summary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{diagnostics, Diagnostics};
use crate::assembly::{DiscreteState, Problem};
use crate::config::OutputConfig;
use crate::error::{Error, Result};
use crate::geometry::PartitionedDomain;
use crate::mesh::{EdgeMesh, SubdomainMesh};
use crate::timestepper::SolverStats;

pub const CSV_NAME: &str = "diagnostics.csv";
pub const SUMMARY_NAME: &str = "summary.json";
pub const PARTIAL_MARKER: &str = "PARTIAL_OUTPUT";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(vertex_count: usize) -> Vec<String> {
    let mut h: Vec<String> = ["time", "total_mass", "X", "sup_u", "sup_w", "energy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..vertex_count).map(|k| format!("z_{k}")));
    h
}

pub fn csv_row(d: &Diagnostics) -> Vec<String> {
    let mut r = vec![
        num(d.time),
        num(d.total_mass),
        num(d.x),
        num(d.sup_u),
        num(d.sup_w),
        num(d.energy),
    ];
    r.extend(d.z.iter().map(|&z| num(z)));
    r
}

pub fn write_diagnostics_csv(path: &Path, rows: &[Diagnostics], vertex_count: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(csv_header(vertex_count)).map_err(csv_err)?;
    for d in rows {
        w.write_record(csv_row(d)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::InvalidArgument(format!("csv: {k:?}")),
    }
}

/// Header and numeric rows of a diagnostics file.
pub fn read_diagnostics_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!(
                        "{}: row {}: '{s}' is not a number",
                        path.display(),
                        n + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Legacy ASCII unstructured grid of one subdomain with point data `u`.
pub fn vtk_subdomain(mesh: &SubdomainMesh, u: &[f64], title: &str) -> String {
    let n = mesh.nodes.len();
    let nt = mesh.triangles.len();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} {}", num(p[0]), num(p[1]), num(0.0));
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(
        s,
        "POINT_DATA {n}\nSCALARS u double 1\nLOOKUP_TABLE default"
    );
    for v in u {
        let _ = writeln!(s, "{}", num(*v));
    }
    s
}

/// Legacy ASCII polydata of one edge (one line cell per mesh cell) with
/// point data `w`.
pub fn vtk_edge(domain: &PartitionedDomain, mesh: &EdgeMesh, w: &[f64], title: &str) -> String {
    let n = mesh.nodes.len();
    let nc = mesh.cell_count();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA"
    );
    let _ = writeln!(s, "POINTS {n} double");
    for &a in &mesh.nodes {
        let p = domain.edge_point(mesh.edge, a);
        let _ = writeln!(s, "{} {} {}", num(p[0]), num(p[1]), num(0.0));
    }
    let _ = writeln!(s, "LINES {nc} {}", 3 * nc);
    for (a, b) in mesh.cells() {
        let _ = writeln!(s, "2 {a} {b}");
    }
    let _ = writeln!(
        s,
        "POINT_DATA {n}\nSCALARS w double 1\nLOOKUP_TABLE default"
    );
    for v in w {
        let _ = writeln!(s, "{}", num(*v));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub h: f64,
    pub triangles: usize,
    pub subdomain_nodes: Vec<usize>,
    pub edge_nodes: Vec<usize>,
}

impl MeshSummary {
    pub fn of(problem: &Problem) -> Self {
        Self {
            h: problem.disc.h,
            triangles: problem.disc.triangle_count(),
            subdomain_nodes: problem
                .disc
                .subdomains
                .iter()
                .map(|m| m.nodes.len())
                .collect(),
            edge_nodes: problem.disc.edges.iter().map(|e| e.nodes.len()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub steps: usize,
    pub t_final: f64,
    pub mesh: MeshSummary,
    pub final_diagnostics: Diagnostics,
    pub solver: SolverStats,
}

/// Streams diagnostics rows and VTK snapshots while a run progresses.
/// On any write failure the caller should invoke [`mark_partial`].
pub struct OutputSink {
    dir: PathBuf,
    csv: Option<csv::Writer<BufWriter<File>>>,
    vtk: bool,
    vtk_every: usize,
    total_steps: usize,
    summary: bool,
}

impl OutputSink {
    pub fn create(
        dir: &Path,
        cfg: &OutputConfig,
        vertex_count: usize,
        total_steps: usize,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let marker = dir.join(PARTIAL_MARKER);
        if marker.exists() {
            fs::remove_file(&marker)?;
        }
        let csv = if cfg.csv {
            let f = BufWriter::new(File::create(dir.join(CSV_NAME))?);
            let mut w = csv::Writer::from_writer(f);
            w.write_record(csv_header(vertex_count)).map_err(csv_err)?;
            Some(w)
        } else {
            None
        };
        if cfg.vtk {
            fs::create_dir_all(dir.join("vtk"))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            vtk: cfg.vtk,
            vtk_every: cfg.vtk_every,
            total_steps,
            summary: cfg.summary,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn snapshot_due(&self, step: usize) -> bool {
        step == 0
            || step == self.total_steps
            || (self.vtk_every > 0 && step.is_multiple_of(self.vtk_every))
    }

    pub fn observe(
        &mut self,
        problem: &Problem,
        step: usize,
        t: f64,
        state: &DiscreteState,
    ) -> Result<()> {
        if let Some(w) = self.csv.as_mut() {
            w.write_record(csv_row(&diagnostics(problem, state, t)))
                .map_err(csv_err)?;
        }
        if self.vtk && self.snapshot_due(step) {
            self.write_vtk(problem, step, t, state)?;
        }
        Ok(())
    }

    pub fn write_vtk(
        &self,
        problem: &Problem,
        step: usize,
        t: f64,
        state: &DiscreteState,
    ) -> Result<()> {
        let vtk = self.dir.join("vtk");
        for (i, m) in problem.disc.subdomains.iter().enumerate() {
            let title = format!("netdiff subdomain {i} step {step} t {}", num(t));
            fs::write(
                vtk.join(format!("subdomain_{i}_{step:06}.vtk")),
                vtk_subdomain(m, &state.u[i], &title),
            )?;
        }
        for (j, m) in problem.disc.edges.iter().enumerate() {
            let title = format!("netdiff edge {j} step {step} t {}", num(t));
            fs::write(
                vtk.join(format!("edge_{j}_{step:06}.vtk")),
                vtk_edge(&problem.domain, m, &state.w[j], &title),
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self, summary: &Summary) -> Result<()> {
        if let Some(mut w) = self.csv.take() {
            w.flush()?;
        }
        if self.summary {
            write_json(&self.dir.join(SUMMARY_NAME), summary)?;
        }
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Leaves a marker explaining why the outputs in `dir` are incomplete.
pub fn mark_partial(dir: &Path, reason: &str) {
    if let Err(e) = fs::write(dir.join(PARTIAL_MARKER), format!("{reason}\n")) {
        log::error!(
            "could not write partial-output marker in {}: {e}",
            dir.display()
        );
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassAudit {
    pub rows: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub max_abs_drift: f64,
    pub max_rel_drift: f64,
}

/// Drift of the `total_mass` column relative to its first value.
pub fn mass_audit(header: &[String], rows: &[Vec<f64>]) -> Result<MassAudit> {
    let col = header
        .iter()
        .position(|h| h == "total_mass")
        .ok_or_else(|| Error::InvalidArgument("no total_mass column".into()))?;
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidArgument("diagnostics file has no rows".into()))?;
    let m0 = first[col];
    let mut max_abs = 0.0f64;
    for r in rows {
        let v = *r
            .get(col)
            .ok_or_else(|| Error::InvalidArgument("short diagnostics row".into()))?;
        max_abs = max_abs.max((v - m0).abs());
    }
    Ok(MassAudit {
        rows: rows.len(),
        initial_mass: m0,
        final_mass: rows[rows.len() - 1][col],
        max_abs_drift: max_abs,
        max_rel_drift: if m0 != 0.0 {
            max_abs / m0.abs()
        } else {
            max_abs
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use crate::mesh::mesh_domain;

    fn diag(t: f64, mass: f64) -> Diagnostics {
        Diagnostics {
            time: t,
            total_mass: mass,
            x: 0.0,
            sup_u: 0.0,
            sup_w: 0.0,
            energy: 0.0,
            z: vec![0.1, 0.2],
            extinct: false,
        }
    }

    #[test]
    fn csv_header_and_precision() {
        assert_eq!(
            csv_header(2).join(","),
            "time,total_mass,X,sup_u,sup_w,energy,z_0,z_1"
        );
        let r = csv_row(&diag(0.1, 1.0 / 3.0));
        assert_eq!(r[0], "1.0000000000000001e-1");
        // 17 significant digits survive a text round trip
        assert_eq!(r[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(r.len(), 8);
    }

    #[test]
    fn csv_round_trip_and_audit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(CSV_NAME);
        let rows = vec![diag(0.0, 2.0), diag(0.5, 2.0 + 1e-9), diag(1.0, 2.0 - 3e-9)];
        write_diagnostics_csv(&p, &rows, 2).unwrap();
        let (h, v) = read_diagnostics_csv(&p).unwrap();
        assert_eq!(h, csv_header(2));
        assert_eq!(v[1][1], 2.0 + 1e-9);
        let a = mass_audit(&h, &v).unwrap();
        assert_eq!(a.rows, 3);
        assert!((a.max_abs_drift - 3e-9).abs() < 1e-15);
        assert!((a.max_rel_drift - 1.5e-9).abs() < 1e-15);
    }

    #[test]
    fn vtk_counts_match_mesh() {
        let d = presets::two_rectangles();
        let disc = mesh_domain(&d, 0.25).unwrap();
        let m = &disc.subdomains[0];
        let u = vec![1.0; m.nodes.len()];
        let s = vtk_subdomain(m, &u, "t");
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[4], format!("POINTS {} double", m.nodes.len()));
        let cells = lines.iter().position(|l| l.starts_with("CELLS")).unwrap();
        assert_eq!(
            lines[cells],
            format!("CELLS {} {}", m.triangles.len(), 4 * m.triangles.len())
        );
        assert_eq!(cells, 5 + m.nodes.len());
        let types = lines
            .iter()
            .position(|l| l.starts_with("CELL_TYPES"))
            .unwrap();
        let pd = lines
            .iter()
            .position(|l| l.starts_with("POINT_DATA"))
            .unwrap();
        assert_eq!(pd - types - 1, m.triangles.len());
        assert!(lines[types + 1..pd].iter().all(|l| *l == "5"));
        assert_eq!(lines.len(), pd + 3 + m.nodes.len());

        let e = &disc.edges[6];
        let w = vec![0.5; e.nodes.len()];
        let s = vtk_edge(&d, e, &w, "t");
        assert!(s.contains(&format!("LINES {} {}", e.cell_count(), 3 * e.cell_count())));
        // the shared edge runs from (0.5, 0) to (0.5, 1)
        assert!(s.contains(&format!("{} {} {}", num(0.5), num(1.0), num(0.0))));
    }
}
