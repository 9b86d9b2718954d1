//! Command-line front end.
//!
//! Exit codes: 0 success (or `GLOBAL_SADDLE`), 1 `NOT_CERTIFIED`, 2 usage
//! or configuration error, 3 numerical failure or unwritable output.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::certify::{certify, Verdict};
use crate::dynamics::{iterate, MapSpec};
use crate::fixed_points::{classify_local, find_fixed_points, gap_consistency, orientation, spectrum_gap, FixedPointRecord};
use crate::flows::lienard::build_lienard_on;
use crate::flows::{find_periodic_orbit, monodromy, time_t_map, PeriodicSystem};
use crate::geom::{Point, Rect};
use crate::index::index_at_point;
use crate::manifolds::{grow_stable, grow_unstable, ManifoldParams, ManifoldPolyline};
use crate::symmetry::detect_symmetry;

pub use config::{Config, ConfigError, Dynamics};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "saddlecert", version, about = "Global saddle certificates for planar maps and periodic ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fixed points, classification, indices and symmetry.
    Analyze(Common),
    /// Apply the certification rules and print the certificate.
    Certify(Common),
    /// Write an SVG phase portrait and the manifold polylines.
    Portrait(Common),
    /// Grow the stable and unstable manifolds and write them as CSV.
    Manifolds(Common),
    /// Periodic orbit and monodromy of a periodic system.
    Poincare(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "x0,x1,y0,y1", value_parser = parse_region, allow_hyphen_values = true)]
    region: Option<Rect>,
    #[arg(long, value_name = "ARCLEN")]
    budget: Option<f64>,
}

fn parse_region(s: &str) -> Result<Rect, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    if v.len() != 4 {
        return Err("expected four comma-separated numbers".into());
    }
    let r = Rect::new(v[0], v[1], v[2], v[3]);
    if !r.is_valid() {
        return Err(format!("region {r} is empty"));
    }
    Ok(r)
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

/// The loaded dynamics: a map, or the time-T map of a system together with
/// its periodic point, which is moved to the origin for the analyses that
/// need it.
struct Loaded {
    map: MapSpec,
    system: Option<PeriodicSystem>,
    lienard: Option<crate::flows::LienardSpec>,
    orbit_seed: Point,
}

impl Loaded {
    fn is_flow(&self) -> bool {
        self.system.is_some()
    }

    fn periodic_point(&self) -> Result<FixedPointRecord, Failure> {
        let sys = self.system.as_ref().expect("flow");
        find_periodic_orbit(sys, self.orbit_seed)
            .map_err(|e| fail(EXIT_NUMERICAL, format!("periodic orbit search failed: {e}")))
    }

    /// The map with the point of interest at the origin.
    fn centred(&self) -> Result<MapSpec, Failure> {
        if self.is_flow() {
            Ok(self.map.translated(self.periodic_point()?.location))
        } else {
            Ok(self.map.clone())
        }
    }
}

fn load(cfg: &Config) -> Result<Loaded, Failure> {
    match &cfg.dynamics {
        Dynamics::Map { name, fx, fy, inverse } => {
            let map = MapSpec::from_formulas(name.clone(), cfg.region, fx.clone(), fy.clone(), inverse.clone())
                .map_err(|e| fail(EXIT_CONFIG, format!("map rejected: {e}")))?;
            Ok(Loaded { map, system: None, lienard: None, orbit_seed: Point::ORIGIN })
        }
        Dynamics::System { name, x1, x2, period, seed } => {
            let sys = PeriodicSystem::from_expressions(name, x1.clone(), x2.clone(), *period)
                .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
            sys.check_finite(cfg.region, 8).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
            Ok(Loaded { map: time_t_map(&sys, cfg.region), system: Some(sys), lienard: None, orbit_seed: *seed })
        }
        Dynamics::Lienard { f, g, p, period, range } => {
            let (spec, sys) = build_lienard_on(f.clone(), g.clone(), p.clone(), *period, *range)
                .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
            let seed = spec.orbit_seed();
            Ok(Loaded { map: time_t_map(&sys, cfg.region), system: Some(sys), lienard: Some(spec), orbit_seed: seed })
        }
    }
}

/// The configured map with its point of interest at the origin: the map
/// itself, or the time-T map translated to its periodic point.
pub fn load_centred(cfg: &Config) -> Result<MapSpec, String> {
    load(cfg).and_then(|l| l.centred()).map_err(|f| f.message)
}

fn read_config(c: &Common) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(&c.config)
        .map_err(|e| fail(EXIT_CONFIG, format!("cannot read {}: {e}", c.config.display())))?;
    let mut cfg =
        Config::parse(&text).map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", c.config.display())))?;
    if let Some(r) = c.region {
        cfg.region = r;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
        cfg.certify.seed = s;
    }
    if let Some(b) = c.budget {
        if !(b > 0.0 && b.is_finite()) {
            return Err(fail(EXIT_CONFIG, "--budget must be positive"));
        }
        if let Some(m) = &mut cfg.certify.manifolds {
            m.budget = b;
        }
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, contents))
        .map_err(|e| fail(EXIT_NUMERICAL, format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn fmt_record(r: &FixedPointRecord) -> String {
    let ev: Vec<String> = r
        .eigenvalues
        .iter()
        .map(|e| if e.im == 0.0 { format!("{:.6e}", e.re) } else { format!("{:.6e}{:+.6e}i", e.re, e.im) })
        .collect();
    format!("{} {} eigenvalues [{}] residual {:.1e}", r.location, r.saddle_kind.label(), ev.join(", "), r.residual)
}

fn cmd_analyze(cfg: &Config, loaded: &Loaded) -> Result<(String, i32), Failure> {
    let m = &loaded.map;
    let region = cfg.region;
    let mut s = String::new();
    let _ = writeln!(s, "map: {}", m.name);
    let _ = writeln!(s, "region: {region}");
    let c1 = find_fixed_points(m, region, 1, &cfg.certify.census);
    let locs = c1.locations();
    let _ = writeln!(s, "fixed points: {}", c1.points.len());
    for r in &c1.points {
        let idx = match index_at_point(m.forward().as_ref(), r.location, &locs) {
            Ok(i) => i.to_string(),
            Err(e) => format!("unavailable ({e})"),
        };
        let _ = writeln!(s, "  {} index {}", fmt_record(r), idx);
    }
    let c2 = find_fixed_points(m, region, 2, &cfg.certify.census);
    let _ = writeln!(s, "Fix(f^2): {} points", c2.points.len());
    for r in &c2.points {
        let genuine = c2.genuine_period2.iter().any(|g| g.location == r.location);
        let _ = writeln!(s, "  {}{}", fmt_record(r), if genuine { " period-2" } else { "" });
    }
    let sym = detect_symmetry(m, region, cfg.certify.symmetry_samples.max(100));
    let res: Vec<String> = sym.residuals.iter().map(|(g, r)| format!("{}={:.3e}", g.label(), r)).collect();
    let _ = writeln!(s, "symmetry: {} ({})", sym.group.label(), res.join(", "));
    let o = orientation(m, region, cfg.certify.orientation_samples);
    let _ = writeln!(s, "orientation: {} on {} samples", o.orientation.label(), o.sample_count);
    let gap = spectrum_gap(m, region, cfg.certify.epsilon, cfg.certify.gap_samples);
    let _ = writeln!(
        s,
        "spectrum gap (epsilon = {}): {} on {} samples, {} violations",
        gap.epsilon,
        if gap.holds_on_samples { "holds" } else { "fails" },
        gap.sample_count,
        gap.violation_points.len()
    );
    gap_consistency(&gap, &c1).map_err(|e| fail(EXIT_NUMERICAL, format!("{s}{e}")))?;
    if c1.points.is_empty() && c1.unconverged == c1.seeds {
        return Err(fail(EXIT_NUMERICAL, format!("{s}no Newton seed converged")));
    }
    Ok((s, EXIT_OK))
}

fn cmd_certify(cfg: &Config, loaded: &Loaded, out: Option<&Path>) -> Result<(String, i32), Failure> {
    let m = loaded.centred()?;
    let cert = certify(&m, m.region, &cfg.certify);
    gap_consistency(&cert.gap, &cert.census).map_err(|e| fail(EXIT_NUMERICAL, format!("{}{e}", cert.to_text())))?;
    let mut text = cert.to_text();
    if let Some(dir) = out {
        let path = write_file(dir, "certificate.cert", &cert.to_key_values())?;
        let _ = writeln!(text, "wrote {}", path.display());
    } else {
        text.push('\n');
        text.push_str(&cert.to_key_values());
    }
    let code = if cert.verdict == Verdict::GlobalSaddle { EXIT_OK } else { EXIT_NOT_CERTIFIED };
    Ok((text, code))
}

fn manifold_params(cfg: &Config) -> ManifoldParams {
    cfg.certify.manifolds.unwrap_or_default()
}

/// Branches of the saddle at the origin of the centred map, with the shift
/// back to the original coordinates.
fn grow_branches(cfg: &Config, loaded: &Loaded) -> Result<(Vec<ManifoldPolyline>, Point, MapSpec), Failure> {
    let m = loaded.centred()?;
    let shift = m.translation.unwrap_or(Point::ORIGIN);
    let rec = classify_local(&m, Point::ORIGIN).map_err(|e| fail(EXIT_NUMERICAL, e.to_string()))?;
    let params = manifold_params(cfg);
    let ws = grow_stable(&m, &rec, &params).map_err(|e| fail(EXIT_NUMERICAL, e.to_string()))?;
    let wu = grow_unstable(&m, &rec, &params).map_err(|e| fail(EXIT_NUMERICAL, e.to_string()))?;
    let mut all = ws.to_vec();
    all.extend(wu);
    Ok((all, shift, m))
}

fn cmd_manifolds(cfg: &Config, loaded: &Loaded, out: Option<&Path>) -> Result<(String, i32), Failure> {
    let (branches, shift, _) = grow_branches(cfg, loaded)?;
    let csv = output::polylines_csv(&branches, shift);
    let mut s = String::new();
    match out {
        Some(dir) => {
            for b in &branches {
                let _ = writeln!(s, "{:15} {:17} {} points", b.branch.label(), b.verdict.label(), b.points.len());
            }
            let path = write_file(dir, "manifolds.csv", &csv)?;
            let _ = writeln!(s, "wrote {}", path.display());
        }
        None => s = csv,
    }
    Ok((s, EXIT_OK))
}

fn cmd_portrait(cfg: &Config, loaded: &Loaded, out: Option<&Path>) -> Result<(String, i32), Failure> {
    let dir = out.ok_or_else(|| fail(EXIT_CONFIG, "portrait needs --out DIR"))?;
    let (branches, shift, _) = grow_branches(cfg, loaded)?;
    let shifted: Vec<Vec<Point>> = branches
        .iter()
        .map(|b| std::iter::once(b.fixed_point).chain(b.points.iter().copied()).map(|p| p + shift).collect())
        .collect();
    let m = &loaded.map;
    let region = cfg.region;
    let census = crate::fixed_points::CensusParams { grid: cfg.certify.census.grid.min(32), ..cfg.certify.census };
    let c1 = find_fixed_points(m, region, 1, &census);
    let c2 = find_fixed_points(m, region, 2, &census);
    let mut markers: Vec<output::Marker> = c1
        .points
        .iter()
        .map(|r| output::Marker { at: r.location, filled: true, label: fmt_record(r) })
        .collect();
    if loaded.is_flow() && markers.iter().all(|mk| mk.at.dist(shift) > 1e-7) {
        markers.push(output::Marker { at: shift, filled: true, label: format!("periodic point {shift}") });
    }
    for r in &c2.genuine_period2 {
        markers.push(output::Marker { at: r.location, filled: false, label: format!("period 2 {}", r.location) });
    }
    let orbits: Vec<Vec<Point>> = region
        .halton(cfg.portrait.orbits)
        .into_iter()
        .map(|p| {
            let mut orbit = vec![p];
            let mut q = p;
            for _ in 0..cfg.portrait.orbit_length {
                match iterate(m, q, 1) {
                    Ok(n) if region.inflated(region.width().max(region.height())).contains(n) => {
                        orbit.push(n);
                        q = n;
                    }
                    _ => break,
                }
            }
            orbit
        })
        .collect();
    let (mut stable, mut unstable) = (Vec::new(), Vec::new());
    for (b, pts) in branches.iter().zip(&shifted) {
        match b.branch.family() {
            crate::manifolds::Family::Stable => stable.push(pts.as_slice()),
            crate::manifolds::Family::Unstable => unstable.push(pts.as_slice()),
        }
    }
    let portrait = output::Portrait {
        title: format!("phase portrait of {}", m.name),
        region,
        width: cfg.portrait.width,
        stable,
        unstable,
        orbits,
        markers,
    };
    let svg = write_file(dir, "portrait.svg", &portrait.to_svg())?;
    let csv = write_file(dir, "portrait.csv", &output::polylines_csv(&branches, shift))?;
    Ok((format!("wrote {}\nwrote {}\n", svg.display(), csv.display()), EXIT_OK))
}

fn cmd_poincare(loaded: &Loaded) -> Result<(String, i32), Failure> {
    let Some(sys) = &loaded.system else {
        return Err(fail(EXIT_CONFIG, "poincare needs a [system] or [lienard] section"));
    };
    let mut s = String::new();
    let _ = writeln!(s, "system: {} (period {})", sys.name, sys.period);
    if let Some(l) = &loaded.lienard {
        for a in &l.assumptions {
            let status = match &a.status {
                crate::flows::AssumptionStatus::VerifiedOnSamples => "VERIFIED_ON_SAMPLES".to_string(),
                crate::flows::AssumptionStatus::Refuted { witness } => format!("REFUTED witness {witness:?}"),
            };
            let _ = writeln!(s, "  {} {} ({})", a.id, status, a.detail);
        }
        let show = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.10}"));
        let _ = writeln!(s, "  p range [{:.10}, {:.10}], alpha {}, beta {}", l.p_min, l.p_max, show(l.alpha), show(l.beta));
    }
    let rec = loaded.periodic_point()?;
    let _ = writeln!(s, "periodic point: {}", fmt_record(&rec));
    let md = monodromy(sys, rec.location).map_err(|e| fail(EXIT_NUMERICAL, format!("{s}monodromy failed: {e}")))?;
    let _ = writeln!(s, "closure |P(q) - q|: {:.3e}", md.closure_residual);
    for (i, mu) in md.multipliers.iter().enumerate() {
        let _ = writeln!(s, "multiplier {i}: {:.12e}{:+.12e}i", mu.re, mu.im);
    }
    let _ = writeln!(
        s,
        "exp(integral of eigenvalues of DX): {:.12e}, {:.12e}",
        md.eigenvalue_integral_multipliers[0], md.eigenvalue_integral_multipliers[1]
    );
    let _ = writeln!(
        s,
        "det: {:.12e}; exp(integral of div): {:.12e}; relative error {:.3e} ({})",
        md.det,
        md.liouville_det,
        md.det_rel_error,
        if md.liouville_ok() { "ok" } else { "FAILED" }
    );
    let _ = writeln!(s, "eigenvalues of DX split in sign at all {} samples: {}", md.lambda_samples.len(), md.lambda_signs_split());
    Ok((s, EXIT_OK))
}

/// Run the command line `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let (common, which) = match &cli.command {
        Command::Analyze(c) => (c, 0),
        Command::Certify(c) => (c, 1),
        Command::Portrait(c) => (c, 2),
        Command::Manifolds(c) => (c, 3),
        Command::Poincare(c) => (c, 4),
    };
    let result = read_config(common).and_then(|cfg| {
        let loaded = load(&cfg)?;
        let out = common.out.as_deref();
        match which {
            0 => cmd_analyze(&cfg, &loaded),
            1 => cmd_certify(&cfg, &loaded, out),
            2 => cmd_portrait(&cfg, &loaded, out),
            3 => cmd_manifolds(&cfg, &loaded, out),
            _ => cmd_poincare(&loaded),
        }
    });
    match result {
        Ok((text, code)) => {
            let _ = stdout.write_all(text.as_bytes());
            code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
