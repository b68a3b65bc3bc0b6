//! Density specifications, density CSVs and point-cloud CSVs.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sphere_ot::density::DensityField;
use sphere_ot::discrete_ot::PointCloudMeasure;
use sphere_ot::grid::{SphereGrid, Vec3, CHART_LABELS};
use sphere_ot::sphere_geom::AmbientPoint;

use crate::error::{CliError, CliResult};

/// Points read from a cloud file may be off the sphere by this much before
/// being projected back.
const CLOUD_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    Uniform,
    Zonal { eps: f64 },
    Bump { center: Vec3, eps: f64 },
    File(PathBuf),
}

fn number(key: &str, v: &str) -> CliResult<f64> {
    v.trim().parse().map_err(|_| CliError::usage(format!("{key}: cannot parse '{v}' as a number")))
}

/// `key=value` pairs split on commas; a piece without `=` continues the
/// previous value, so `center=0,0,1` is a single entry.
fn params(body: &str) -> CliResult<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for piece in body.split(',').filter(|p| !p.is_empty()) {
        match piece.split_once('=') {
            Some((k, v)) => out.push((k.trim().to_string(), v.to_string())),
            None => match out.last_mut() {
                Some(last) => {
                    last.1.push(',');
                    last.1.push_str(piece);
                }
                None => return Err(CliError::usage(format!("malformed generator parameters '{body}'"))),
            },
        }
    }
    Ok(out)
}

impl DensitySpec {
    /// `uniform`, `zonal:eps=E`, `bump:center=X,Y,Z,eps=E`, or a CSV path.
    pub fn parse(s: &str) -> CliResult<DensitySpec> {
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let get = |ps: &[(String, String)], key: &str| -> CliResult<String> {
            ps.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| CliError::usage(format!("generator '{name}' needs {key}=")))
        };
        match name {
            "uniform" if body.is_empty() => Ok(DensitySpec::Uniform),
            "zonal" => {
                let ps = params(body)?;
                Ok(DensitySpec::Zonal { eps: number("eps", &get(&ps, "eps")?)? })
            }
            "bump" => {
                let ps = params(body)?;
                let c: Vec<f64> = get(&ps, "center")?.split(',').map(|v| number("center", v)).collect::<CliResult<_>>()?;
                if c.len() != 3 {
                    return Err(CliError::usage("bump center needs three coordinates"));
                }
                Ok(DensitySpec::Bump { center: [c[0], c[1], c[2]], eps: number("eps", &get(&ps, "eps")?)? })
            }
            _ => {
                let p = PathBuf::from(s);
                if !p.is_file() {
                    return Err(CliError::usage(format!("'{s}' is neither a built-in density nor a readable file")));
                }
                Ok(DensitySpec::File(p))
            }
        }
    }

    pub fn build(&self, grid: Arc<SphereGrid>) -> CliResult<DensityField> {
        Ok(match self {
            DensitySpec::Uniform => DensityField::uniform(grid),
            DensitySpec::Zonal { eps } => DensityField::zonal(grid, *eps)?,
            DensitySpec::Bump { center, eps } => DensityField::bump(grid, *center, *eps)?,
            DensitySpec::File(p) => read_density_csv(std::fs::File::open(p)?, grid, p)?,
        })
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

/// Reads either the nodal format `chart,i,j,logrho` or the zonal format
/// `theta,logrho`. Nodal files must cover every owned node; fringe rows,
/// when absent, are filled by the grid's interpolation relations.
pub fn read_density_csv<R: Read>(r: R, grid: Arc<SphereGrid>, name: &Path) -> CliResult<DensityField> {
    let mut rd = reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let bad = |msg: String| CliError::usage(format!("{}: {msg}", name.display()));
    match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["theta", "logrho"] => {
            let mut table = Vec::new();
            for (k, rec) in rd.records().enumerate() {
                let rec = rec?;
                let th = number("theta", &rec[0]).map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
                let l = number("logrho", &rec[1]).map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
                table.push((th, l));
            }
            Ok(DensityField::from_zonal_table(grid, &table)?)
        }
        ["chart", "i", "j", "logrho"] => {
            let mut vals = vec![f64::NAN; grid.len()];
            for (k, rec) in rd.records().enumerate() {
                let rec = rec?;
                let c = CHART_LABELS
                    .iter()
                    .position(|&l| l == &rec[0])
                    .ok_or_else(|| bad(format!("row {}: unknown chart label '{}'", k + 1, &rec[0])))?;
                let idx = |s: &str| s.parse::<isize>().map_err(|_| bad(format!("row {}: bad index '{s}'", k + 1)));
                let (i, j) = (idx(&rec[1])?, idx(&rec[2])?);
                let id = grid
                    .node_at(c, i, j)
                    .ok_or_else(|| bad(format!("row {}: node ({}, {i}, {j}) is not on a {}-grid", k + 1, &rec[0], grid.size)))?;
                vals[id] = number("logrho", &rec[3]).map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
            }
            if let Some(&id) = grid.owned().iter().find(|&&id| vals[id].is_nan()) {
                let n = &grid.nodes()[id];
                return Err(bad(format!("missing owned node ({}, {}, {})", CHART_LABELS[n.chart], n.i, n.j)));
            }
            if grid.fringe().iter().any(|&id| vals[id].is_nan()) {
                for &id in grid.fringe() {
                    vals[id] = 0.0;
                }
                grid.sync_fringe(&mut vals);
            }
            Ok(DensityField::from_logrho(grid, vals)?)
        }
        _ => Err(bad(format!("unrecognised header '{}'", header.join(",")))),
    }
}

pub fn write_density_csv<W: Write>(w: W, field: &DensityField) -> CliResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["chart", "i", "j", "logrho"])?;
    for (n, l) in field.grid().nodes().iter().zip(field.logrho()) {
        wr.write_record([CHART_LABELS[n.chart].to_string(), n.i.to_string(), n.j.to_string(), format!("{l:.16e}")])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_zonal_csv<W: Write>(w: W, table: &[(f64, f64)]) -> CliResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["theta", "logrho"])?;
    for (t, l) in table {
        wr.write_record([format!("{t:.16e}"), format!("{l:.16e}")])?;
    }
    wr.flush()?;
    Ok(())
}

/// Cloud CSV with header `x,y,z,w`; weights are rescaled to unit mass.
pub fn read_cloud<R: Read>(r: R, name: &Path) -> CliResult<PointCloudMeasure> {
    let mut rd = reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let bad = |msg: String| CliError::usage(format!("{}: {msg}", name.display()));
    if header != ["x", "y", "z", "w"] {
        return Err(bad(format!("expected header x,y,z,w, got '{}'", header.join(","))));
    }
    let (mut pts, mut ws) = (Vec::new(), Vec::new());
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = (0..4)
            .map(|c| number(&header[c], &rec[c]).map_err(|e| bad(format!("row {}: {e}", k + 1))))
            .collect::<CliResult<_>>()?;
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !((r - 1.0).abs() <= CLOUD_NORM_TOL) {
            return Err(bad(format!("row {}: point has norm {r}", k + 1)));
        }
        pts.push(AmbientPoint::normalized(v[..3].to_vec())?);
        ws.push(v[3]);
    }
    Ok(PointCloudMeasure::normalized(pts, ws)?)
}

pub fn write_cloud<W: Write>(w: W, cloud: &PointCloudMeasure) -> CliResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "y", "z", "w"])?;
    for (p, m) in cloud.points().iter().zip(cloud.weights()) {
        let c = p.coords();
        wr.write_record([c[0], c[1], c[2], *m].map(|v| format!("{v:.16e}")))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_generators() {
        assert_eq!(DensitySpec::parse("uniform").unwrap(), DensitySpec::Uniform);
        assert_eq!(DensitySpec::parse("zonal:eps=0.25").unwrap(), DensitySpec::Zonal { eps: 0.25 });
        assert_eq!(
            DensitySpec::parse("bump:center=0,-1,0.5,eps=0.3").unwrap(),
            DensitySpec::Bump { center: [0.0, -1.0, 0.5], eps: 0.3 }
        );
        assert!(matches!(DensitySpec::parse("zonal:e=1"), Err(CliError::Usage(_))));
        assert!(matches!(DensitySpec::parse("bump:center=1,2,eps=0.1"), Err(CliError::Usage(_))));
        assert!(matches!(DensitySpec::parse("/no/such/file.csv"), Err(CliError::Usage(_))));
    }

    #[test]
    fn nodal_round_trip_and_fringe_fill() {
        let g = Arc::new(SphereGrid::new(32).unwrap());
        let f = DensityField::bump(g.clone(), [0.2, 0.3, 1.0], 0.5).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &f).unwrap();
        let back = read_density_csv(buf.as_slice(), g.clone(), Path::new("mem")).unwrap();
        assert!(back.logrho().iter().zip(f.logrho()).all(|(a, b)| (a - b).abs() < 1e-14));

        // Dropping the fringe rows: they are rebuilt from the owned values.
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let mut kept = vec![lines.next().unwrap().to_string()];
        for (n, l) in g.nodes().iter().zip(lines) {
            if n.owned {
                kept.push(l.to_string());
            }
        }
        let owned_only = kept.join("\n");
        let back = read_density_csv(owned_only.as_bytes(), g.clone(), Path::new("mem")).unwrap();
        let err = g.owned().iter().map(|&id| (back.logrho()[id] - f.logrho()[id]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn rejects_bad_rows() {
        let g = Arc::new(SphereGrid::new(32).unwrap());
        let e = read_density_csv("chart,i,j,logrho\nQ,0,0,1\n".as_bytes(), g.clone(), Path::new("m")).unwrap_err();
        assert!(e.to_string().contains("unknown chart label"));
        let e = read_density_csv("chart,i,j,logrho\nN,16,16,1\n".as_bytes(), g.clone(), Path::new("m")).unwrap_err();
        assert!(e.to_string().contains("missing owned node"));
        let e = read_density_csv("a,b\n1,2\n".as_bytes(), g, Path::new("m")).unwrap_err();
        assert!(e.to_string().contains("unrecognised header"));
    }

    #[test]
    fn cloud_round_trip() {
        let pts = sphere_ot::discrete_ot::fibonacci_sphere(10);
        let c = PointCloudMeasure::uniform(pts).unwrap();
        let mut buf = Vec::new();
        write_cloud(&mut buf, &c).unwrap();
        let back = read_cloud(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.len(), 10);
        for (a, b) in back.points().iter().zip(c.points()) {
            assert!((a.dot(b) - 1.0).abs() < 1e-15);
        }
        assert!(read_cloud("x,y,z,w\n0,0,2,1\n".as_bytes(), Path::new("m")).is_err());
    }
}
