//! The sectioned `key = value` configuration format.
//!
//! ```text
//! # comment
//! [map]
//! name = "pd2"
//! x = "2*x*(1+y^2)"
//! y = "y/3"
//!
//! [region]
//! x0 = -10
//! x1 = 10
//! y0 = -10
//! y1 = 10
//! ```
//!
//! Expression values are double-quoted. Numeric values may be constant
//! expressions such as `2*pi`, quoted or not.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::certify::CertifyConfig;
use crate::expr::{Expression, ParseError};
use crate::fixed_points::CensusParams;
use crate::geom::{Point, Rect};
use crate::manifolds::ManifoldParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: [{section}] {key}: {source}")]
    Expression { line: usize, section: String, key: String, source: ParseError },
    #[error("line {line}: [{section}] {key}: {message}")]
    Value { line: usize, section: String, key: String, message: String },
    #[error("[{section}] is missing required key '{key}'")]
    Missing { section: String, key: String },
    #[error("{0}")]
    Structure(String),
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
    quoted: bool,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

const SECTIONS: &[(&str, &[&str])] = &[
    ("map", &["name", "x", "y", "inv_x", "inv_y"]),
    ("system", &["name", "x", "y", "period", "seed_x", "seed_y"]),
    ("lienard", &["f", "g", "p", "period", "range"]),
    ("region", &["x0", "x1", "y0", "y1"]),
    ("tolerances", &["epsilon", "merge_tol", "residual_tol"]),
    ("census", &["grid", "newton_steps"]),
    (
        "certify",
        &["gap_samples", "orientation_samples", "symmetry_samples", "quadrant_samples", "survey_points"],
    ),
    ("manifolds", &["enabled", "delta_seed_rel", "h_max", "h_min", "r_escape", "budget", "max_points"]),
    ("portrait", &["orbits", "orbit_length", "width"]),
    ("run", &["seed"]),
];

fn parse_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: "unterminated section header".into() })?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::Syntax { line, message: format!("unknown section [{name}]") });
            }
            if out.contains_key(name) {
                return Err(ConfigError::Syntax { line, message: format!("duplicate section [{name}]") });
            }
            out.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let Some(section) = &current else {
            return Err(ConfigError::Syntax { line, message: "key outside of a section".into() });
        };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: "expected key = value".into() })?;
        let key = key.trim();
        let allowed = SECTIONS.iter().find(|(s, _)| s == section).unwrap().1;
        if !allowed.contains(&key) {
            return Err(ConfigError::Syntax { line, message: format!("unknown key '{key}' in [{section}]") });
        }
        let value = value.trim();
        let (value, quoted) = match value.strip_prefix('"') {
            Some(rest) => (
                rest.strip_suffix('"')
                    .ok_or_else(|| ConfigError::Syntax { line, message: "unterminated string".into() })?
                    .to_string(),
                true,
            ),
            None => (value.to_string(), false),
        };
        let map = out.get_mut(section).unwrap();
        if map.contains_key(key) {
            return Err(ConfigError::Syntax { line, message: format!("duplicate key '{key}'") });
        }
        map.insert(key.to_string(), Entry { line, value, quoted });
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

struct Reader<'a> {
    sections: &'a Sections,
}

impl Reader<'_> {
    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.get(key)
    }

    fn expr(&self, section: &str, key: &str) -> Result<Option<Expression>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        if !e.quoted {
            return Err(ConfigError::Value {
                line: e.line,
                section: section.into(),
                key: key.into(),
                message: "expressions must be double-quoted".into(),
            });
        }
        Expression::parse(&e.value).map(Some).map_err(|source| ConfigError::Expression {
            line: e.line,
            section: section.into(),
            key: key.into(),
            source,
        })
    }

    fn required_expr(&self, section: &str, key: &str) -> Result<Expression, ConfigError> {
        self.expr(section, key)?.ok_or_else(|| ConfigError::Missing { section: section.into(), key: key.into() })
    }

    fn number(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let bad = |message: String| ConfigError::Value { line: e.line, section: section.into(), key: key.into(), message };
        let ex = Expression::parse(&e.value).map_err(|source| ConfigError::Expression {
            line: e.line,
            section: section.into(),
            key: key.into(),
            source,
        })?;
        if !ex.free_variables().is_empty() {
            return Err(bad("numeric values may not use x, y or t".into()));
        }
        let v = ex.eval(0.0, 0.0, 0.0).map_err(|err| bad(err.to_string()))?;
        if !v.is_finite() {
            return Err(bad(format!("value {v} is not finite")));
        }
        Ok(Some(v))
    }

    fn count(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some(v) = self.number(section, key)? else { return Ok(None) };
        let e = self.entry(section, key).unwrap();
        if v < 0.0 || v.fract() != 0.0 || v > 1e12 {
            return Err(ConfigError::Value {
                line: e.line,
                section: section.into(),
                key: key.into(),
                message: format!("expected a non-negative integer, got {v}"),
            });
        }
        Ok(Some(v as usize))
    }

    fn positive(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.number(section, key)?;
        if let Some(v) = v {
            if v <= 0.0 {
                let e = self.entry(section, key).unwrap();
                return Err(ConfigError::Value {
                    line: e.line,
                    section: section.into(),
                    key: key.into(),
                    message: "must be positive".into(),
                });
            }
        }
        Ok(v)
    }

    fn text(&self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key).map(|e| e.value.clone())
    }

    fn flag(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        match e.value.as_str() {
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            other => Err(ConfigError::Value {
                line: e.line,
                section: section.into(),
                key: key.into(),
                message: format!("expected true or false, got '{other}'"),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Dynamics {
    Map { name: String, fx: Expression, fy: Expression, inverse: Option<(Expression, Expression)> },
    System { name: String, x1: Expression, x2: Expression, period: f64, seed: Point },
    Lienard { f: Expression, g: Expression, p: Expression, period: f64, range: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitParams {
    pub orbits: usize,
    pub orbit_length: usize,
    pub width: usize,
}

impl Default for PortraitParams {
    fn default() -> Self {
        PortraitParams { orbits: 24, orbit_length: 12, width: 800 }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub dynamics: Dynamics,
    pub region: Rect,
    pub certify: CertifyConfig,
    pub portrait: PortraitParams,
    pub seed: u64,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let sections = parse_sections(text)?;
        let r = Reader { sections: &sections };
        let present: Vec<&str> =
            ["map", "system", "lienard"].into_iter().filter(|s| sections.contains_key(*s)).collect();
        if present.len() != 1 {
            return Err(ConfigError::Structure(format!(
                "exactly one of [map], [system], [lienard] is required, found {}",
                if present.is_empty() { "none".to_string() } else { present.join(", ") }
            )));
        }
        let dynamics = match present[0] {
            "map" => {
                let inv = match (r.expr("map", "inv_x")?, r.expr("map", "inv_y")?) {
                    (Some(a), Some(b)) => Some((a, b)),
                    (None, None) => None,
                    _ => return Err(ConfigError::Structure("[map] needs both inv_x and inv_y or neither".into())),
                };
                Dynamics::Map {
                    name: r.text("map", "name").unwrap_or_else(|| "map".into()),
                    fx: r.required_expr("map", "x")?,
                    fy: r.required_expr("map", "y")?,
                    inverse: inv,
                }
            }
            "system" => Dynamics::System {
                name: r.text("system", "name").unwrap_or_else(|| "system".into()),
                x1: r.required_expr("system", "x")?,
                x2: r.required_expr("system", "y")?,
                period: r
                    .positive("system", "period")?
                    .ok_or_else(|| ConfigError::Missing { section: "system".into(), key: "period".into() })?,
                seed: Point::new(
                    r.number("system", "seed_x")?.unwrap_or(0.0),
                    r.number("system", "seed_y")?.unwrap_or(0.0),
                ),
            },
            _ => Dynamics::Lienard {
                f: r.required_expr("lienard", "f")?,
                g: r.required_expr("lienard", "g")?,
                p: r.required_expr("lienard", "p")?,
                period: r
                    .positive("lienard", "period")?
                    .ok_or_else(|| ConfigError::Missing { section: "lienard".into(), key: "period".into() })?,
                range: r.positive("lienard", "range")?.unwrap_or(crate::flows::lienard::DEFAULT_CHECK_RANGE),
            },
        };

        let mut coords = [0.0; 4];
        for (i, k) in ["x0", "x1", "y0", "y1"].iter().enumerate() {
            coords[i] = r
                .number("region", k)?
                .ok_or_else(|| ConfigError::Missing { section: "region".into(), key: (*k).into() })?;
        }
        let region = Rect::new(coords[0], coords[1], coords[2], coords[3]);
        if !region.is_valid() {
            return Err(ConfigError::Structure(format!("region {region} is empty")));
        }

        let mut cert = CertifyConfig::default();
        if let Some(v) = r.positive("tolerances", "epsilon")? {
            cert.epsilon = v;
        }
        let mut census = CensusParams::default();
        if let Some(v) = r.positive("tolerances", "merge_tol")? {
            census.merge_tol = v;
        }
        if let Some(v) = r.positive("tolerances", "residual_tol")? {
            census.residual_tol = v;
        }
        if let Some(v) = r.count("census", "grid")? {
            census.grid = v.max(1);
        }
        if let Some(v) = r.count("census", "newton_steps")? {
            census.newton_steps = v;
        }
        cert.census = census;
        for (key, slot) in [
            ("gap_samples", &mut cert.gap_samples),
            ("orientation_samples", &mut cert.orientation_samples),
            ("symmetry_samples", &mut cert.symmetry_samples),
            ("quadrant_samples", &mut cert.quadrant_samples),
            ("survey_points", &mut cert.survey_points),
        ] {
            if let Some(v) = r.count("certify", key)? {
                *slot = v;
            }
        }
        let mut mp = ManifoldParams::default();
        for (key, slot) in [
            ("delta_seed_rel", &mut mp.delta_seed_rel),
            ("h_max", &mut mp.h_max),
            ("h_min", &mut mp.h_min),
            ("r_escape", &mut mp.r_escape),
            ("budget", &mut mp.budget),
        ] {
            if let Some(v) = r.positive("manifolds", key)? {
                *slot = v;
            }
        }
        if let Some(v) = r.count("manifolds", "max_points")? {
            mp.max_points = v.max(16);
        }
        cert.manifolds = if r.flag("manifolds", "enabled")?.unwrap_or(true) { Some(mp) } else { None };

        let mut portrait = PortraitParams::default();
        if let Some(v) = r.count("portrait", "orbits")? {
            portrait.orbits = v;
        }
        if let Some(v) = r.count("portrait", "orbit_length")? {
            portrait.orbit_length = v;
        }
        if let Some(v) = r.count("portrait", "width")? {
            portrait.width = v.max(100);
        }
        let seed = r.count("run", "seed")?.map_or(42, |v| v as u64);
        cert.seed = seed;
        Ok(Config { dynamics, region, certify: cert, portrait, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PD2: &str = r#"
# the D2 example
[map]
name = "pd2"
x = "2*x*(1+y^2)"   # first coordinate
y = "y/3"
inv_x = "x/(2*(1+9*y^2))"
inv_y = "3*y"

[region]
x0 = -10
x1 = 10
y0 = -10
y1 = 10
"#;

    #[test]
    fn parses_map_config() {
        let c = Config::parse(PD2).unwrap();
        assert!(matches!(&c.dynamics, Dynamics::Map { name, inverse: Some(_), .. } if name == "pd2"));
        assert_eq!(c.region, Rect::square(10.0));
        assert_eq!(c.seed, 42);
        assert_eq!(c.certify.epsilon, 1.0);
    }

    #[test]
    fn numeric_values_may_be_expressions() {
        let text = "[lienard]\nf = \"1\"\ng = \"-x\"\np = \"sin(t)\"\nperiod = 2*pi\n[region]\nx0=-1\nx1=1\ny0=-1\ny1=1\n";
        let c = Config::parse(text).unwrap();
        match c.dynamics {
            Dynamics::Lienard { period, .. } => assert_eq!(period, 2.0 * std::f64::consts::PI),
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn malformed_expression_reports_location() {
        let text = PD2.replace("\"2*x*(1+y^2)\"", "\"2*x*(1+y^2\"");
        match Config::parse(&text) {
            Err(ConfigError::Expression { line, key, source: ParseError::Syntax { offset, .. }, .. }) => {
                assert_eq!((line, key.as_str(), offset), (5, "x", 10));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(Config::parse("[region]\nx0=0\nx1=1\ny0=0\ny1=1\n"), Err(ConfigError::Structure(_))));
        assert!(matches!(Config::parse("[bogus]\n"), Err(ConfigError::Syntax { line: 1, .. })));
        let both = format!("{PD2}\n[system]\nx=\"y\"\ny=\"-x\"\nperiod=1\n");
        assert!(matches!(Config::parse(&both), Err(ConfigError::Structure(_))));
        let bad = PD2.replace("x1 = 10", "x1 = x");
        assert!(matches!(Config::parse(&bad), Err(ConfigError::Value { .. })));
        let unk = PD2.replace("[region]", "[region]\nz0 = 1");
        assert!(matches!(Config::parse(&unk), Err(ConfigError::Syntax { .. })));
    }
}
