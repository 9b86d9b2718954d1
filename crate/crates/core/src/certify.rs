//! Global-saddle certification: evidence gathering, rule evaluation and the
//! resulting certificate.
//!
//! Every conclusion is bounded to the analysed region. Hypotheses such as
//! "0 is the only fixed point" are only checked on that region, and the
//! certificate says so.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{classify_alpha, classify_omega, MapSpec, OrbitParams, OrbitVerdict};
use crate::fixed_points::{
    classify_local, find_fixed_points, gap_consistency, orientation, spectrum_gap, Census, CensusParams, FixedPointRecord,
    Orientation, OrientationReport, SaddleKind, SpectrumGapReport,
};
use crate::geom::{Point, Rect};
use crate::index::{fixed_point_index, IndexError, IndexParams, JordanCurve};
use crate::manifolds::{
    find_contacts, grow_stable, grow_unstable, BranchVerdict, ContactReport, ManifoldParams, ManifoldPolyline,
    CONTACT_TOL,
};
use crate::symmetry::{detect_symmetry, GroupElement, SymmetryGroup, SymmetryReport};

pub const ORIGIN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HypothesisId {
    OriginFixed,
    UniqueFixedPoint,
    LocalSaddle,
    DirectSaddle,
    FixF2Trivial,
    NoPeriod2,
    SpectrumGap,
    OrientationPreserving,
    OrientationConsistent,
    SymmetryKappa,
    SymmetryD2,
}

impl HypothesisId {
    pub const ALL: [HypothesisId; 11] = [
        HypothesisId::OriginFixed,
        HypothesisId::UniqueFixedPoint,
        HypothesisId::LocalSaddle,
        HypothesisId::DirectSaddle,
        HypothesisId::FixF2Trivial,
        HypothesisId::NoPeriod2,
        HypothesisId::SpectrumGap,
        HypothesisId::OrientationPreserving,
        HypothesisId::OrientationConsistent,
        HypothesisId::SymmetryKappa,
        HypothesisId::SymmetryD2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            HypothesisId::OriginFixed => "origin-fixed",
            HypothesisId::UniqueFixedPoint => "unique-fixed-point",
            HypothesisId::LocalSaddle => "local-saddle",
            HypothesisId::DirectSaddle => "direct-saddle",
            HypothesisId::FixF2Trivial => "fix-f2-trivial",
            HypothesisId::NoPeriod2 => "no-period-2",
            HypothesisId::SpectrumGap => "spectrum-gap",
            HypothesisId::OrientationPreserving => "orientation-preserving",
            HypothesisId::OrientationConsistent => "orientation-consistent",
            HypothesisId::SymmetryKappa => "symmetry-kappa",
            HypothesisId::SymmetryD2 => "symmetry-D2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisStatus {
    VerifiedOnRegion,
    Refuted { witness: Point },
    Unresolved { reason: String },
}

impl HypothesisStatus {
    pub fn label(&self) -> &'static str {
        match self {
            HypothesisStatus::VerifiedOnRegion => "VERIFIED_ON_REGION",
            HypothesisStatus::Refuted { .. } => "REFUTED",
            HypothesisStatus::Unresolved { .. } => "UNRESOLVED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub id: HypothesisId,
    pub status: HypothesisStatus,
    /// Which report produced the status, with the key numbers.
    pub evidence: String,
}

impl Hypothesis {
    pub fn verified(&self) -> bool {
        self.status == HypothesisStatus::VerifiedOnRegion
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// D2 symmetry, spectrum gap, orientation preserving direct saddle.
    D2SpectrumGapA,
    /// D2 symmetry, spectrum gap, no period-2 orbits.
    D2SpectrumGapB,
    /// D2 symmetry, unique fixed point, direct saddle.
    D2DirectSaddle,
    /// A reflection symmetry, unique fixed point, orientation preserving direct saddle.
    ReflectionSaddleA,
    /// A reflection symmetry, unique fixed point, `Fix(f^2) = {0}`.
    ReflectionSaddleB,
    SpectrumGapDirectSaddle,
    UniqueDirectSaddle,
    NoPeriodTwoSaddle,
}

impl Rule {
    /// Priority order; the first satisfied rule fires.
    pub const ORDER: [Rule; 8] = [
        Rule::D2SpectrumGapA,
        Rule::D2SpectrumGapB,
        Rule::D2DirectSaddle,
        Rule::ReflectionSaddleA,
        Rule::ReflectionSaddleB,
        Rule::SpectrumGapDirectSaddle,
        Rule::UniqueDirectSaddle,
        Rule::NoPeriodTwoSaddle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Rule::D2SpectrumGapA => "d2-spectrum-gap/a",
            Rule::D2SpectrumGapB => "d2-spectrum-gap/b",
            Rule::D2DirectSaddle => "d2-direct-saddle",
            Rule::ReflectionSaddleA => "reflection-saddle/a",
            Rule::ReflectionSaddleB => "reflection-saddle/b",
            Rule::SpectrumGapDirectSaddle => "spectrum-gap-direct-saddle",
            Rule::UniqueDirectSaddle => "unique-direct-saddle",
            Rule::NoPeriodTwoSaddle => "no-period-two-saddle",
        }
    }

    pub fn hypotheses(self) -> &'static [HypothesisId] {
        use HypothesisId::*;
        match self {
            Rule::D2SpectrumGapA => {
                &[OriginFixed, SymmetryD2, LocalSaddle, SpectrumGap, OrientationPreserving, DirectSaddle]
            }
            Rule::D2SpectrumGapB => {
                &[OriginFixed, OrientationConsistent, SymmetryD2, LocalSaddle, SpectrumGap, NoPeriod2]
            }
            Rule::D2DirectSaddle => &[OriginFixed, OrientationPreserving, SymmetryD2, UniqueFixedPoint, DirectSaddle],
            Rule::ReflectionSaddleA => {
                &[OriginFixed, OrientationPreserving, SymmetryKappa, UniqueFixedPoint, LocalSaddle, DirectSaddle]
            }
            Rule::ReflectionSaddleB => {
                &[OriginFixed, OrientationConsistent, SymmetryKappa, UniqueFixedPoint, LocalSaddle, FixF2Trivial]
            }
            Rule::SpectrumGapDirectSaddle => &[OriginFixed, OrientationConsistent, SpectrumGap, DirectSaddle],
            Rule::UniqueDirectSaddle => &[OriginFixed, OrientationConsistent, UniqueFixedPoint, DirectSaddle],
            Rule::NoPeriodTwoSaddle => {
                &[OriginFixed, OrientationConsistent, UniqueFixedPoint, FixF2Trivial, LocalSaddle]
            }
        }
    }

    pub fn component_action(self) -> Option<ComponentAction> {
        match self {
            Rule::D2SpectrumGapA | Rule::D2DirectSaddle => Some(ComponentAction::FourInvariant),
            Rule::D2SpectrumGapB => Some(ComponentAction::InvariantOrInterchanged),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentAction {
    FourInvariant,
    InvariantOrInterchanged,
}

impl ComponentAction {
    pub fn label(self) -> &'static str {
        match self {
            ComponentAction::FourInvariant => "FOUR_INVARIANT",
            ComponentAction::InvariantOrInterchanged => "INVARIANT_OR_INTERCHANGED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    GlobalSaddle,
    NotCertified,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::GlobalSaddle => "GLOBAL_SADDLE",
            Verdict::NotCertified => "NOT_CERTIFIED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleEvaluation {
    pub rule: Rule,
    pub satisfied: bool,
    /// Hypotheses of the rule that are not verified.
    pub missing: Vec<HypothesisId>,
}

/// Where open quadrants are sent by `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantCheck {
    pub samples: usize,
    /// Image quadrant (0..4, counterclockwise from `x, y > 0`) of each
    /// quadrant, if all its samples agree.
    pub permutation: [Option<usize>; 4],
    /// Every sample stayed in its quadrant.
    pub invariant: bool,
    /// Each quadrant is sent to a single quadrant, and distinct quadrants to
    /// distinct ones.
    pub consistent: bool,
    /// Samples whose image lies on an axis or could not be evaluated.
    pub skipped: usize,
}

fn quadrant(p: Point) -> Option<usize> {
    match (p.x.partial_cmp(&0.0)?, p.y.partial_cmp(&0.0)?) {
        (std::cmp::Ordering::Greater, std::cmp::Ordering::Greater) => Some(0),
        (std::cmp::Ordering::Less, std::cmp::Ordering::Greater) => Some(1),
        (std::cmp::Ordering::Less, std::cmp::Ordering::Less) => Some(2),
        (std::cmp::Ordering::Greater, std::cmp::Ordering::Less) => Some(3),
        _ => None,
    }
}

/// Sample `per_quadrant` random points in each open quadrant of `region`
/// and record the quadrant of their images.
pub fn quadrant_check(m: &MapSpec, region: Rect, per_quadrant: usize, seed: u64) -> QuadrantCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets: [Vec<Option<usize>>; 4] = Default::default();
    let boxes = [
        (0.0f64.max(region.x0), region.x1, 0.0f64.max(region.y0), region.y1),
        (region.x0, 0.0f64.min(region.x1), 0.0f64.max(region.y0), region.y1),
        (region.x0, 0.0f64.min(region.x1), region.y0, 0.0f64.min(region.y1)),
        (0.0f64.max(region.x0), region.x1, region.y0, 0.0f64.min(region.y1)),
    ];
    let mut samples = 0;
    for (qi, b) in boxes.iter().enumerate() {
        if !(b.1 > b.0 && b.3 > b.2) {
            continue;
        }
        let pts: Vec<Point> = (0..per_quadrant)
            .map(|_| loop {
                let p = Point::new(rng.gen_range(b.0..b.1), rng.gen_range(b.2..b.3));
                if quadrant(p) == Some(qi) {
                    break p;
                }
            })
            .collect();
        samples += pts.len();
        targets[qi] = pts.par_iter().map(|&p| m.eval(p).ok().and_then(quadrant)).collect();
    }
    let mut permutation = [None; 4];
    let mut skipped = 0;
    let mut consistent = true;
    let mut invariant = true;
    for qi in 0..4 {
        let mut seen = None;
        for t in &targets[qi] {
            match t {
                None => skipped += 1,
                Some(t) => {
                    invariant &= *t == qi;
                    match seen {
                        None => seen = Some(*t),
                        Some(s) if s != *t => consistent = false,
                        _ => {}
                    }
                }
            }
        }
        permutation[qi] = seen;
    }
    let images: Vec<usize> = permutation.iter().flatten().copied().collect();
    let mut sorted = images.clone();
    sorted.sort_unstable();
    sorted.dedup();
    consistent &= sorted.len() == images.len();
    QuadrantCheck { samples, permutation, invariant: invariant && consistent, consistent, skipped }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub epsilon: f64,
    pub gap_samples: usize,
    pub orientation_samples: usize,
    pub symmetry_samples: usize,
    pub census: CensusParams,
    pub quadrant_samples: usize,
    /// Points for the limit-set survey; 0 skips it.
    pub survey_points: usize,
    /// `None` skips manifold growth.
    pub manifolds: Option<ManifoldParams>,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            epsilon: 1.0,
            gap_samples: 10_000,
            orientation_samples: 10_000,
            symmetry_samples: 1000,
            census: CensusParams::default(),
            quadrant_samples: 100,
            survey_points: 200,
            manifolds: Some(ManifoldParams::default()),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSummary {
    pub branch: &'static str,
    pub verdict: BranchVerdict,
    pub points: usize,
    pub arclength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corroboration {
    pub stable: Vec<ManifoldPolyline>,
    pub unstable: Vec<ManifoldPolyline>,
    pub contacts: ContactReport,
    pub survey: Option<SurveySummary>,
}

impl Corroboration {
    pub fn branches(&self) -> impl Iterator<Item = &ManifoldPolyline> {
        self.stable.iter().chain(&self.unstable)
    }

    pub fn all_unbounded(&self) -> bool {
        self.branches().all(|b| b.verdict == BranchVerdict::Unbounded)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub map_name: String,
    pub verdict: Verdict,
    /// Certified, but some branch did not reach the escape radius within budget.
    pub conditional: bool,
    pub rule: Option<Rule>,
    pub rules: Vec<RuleEvaluation>,
    pub hypotheses: Vec<Hypothesis>,
    pub region: Rect,
    pub tolerances: Vec<(&'static str, f64)>,
    pub component_action: Option<ComponentAction>,
    pub origin: Option<FixedPointRecord>,
    pub census: Census,
    pub census2: Census,
    pub gap: SpectrumGapReport,
    pub orientation: OrientationReport,
    pub symmetry: SymmetryReport,
    pub quadrants: Option<QuadrantCheck>,
    pub corroboration: Option<Corroboration>,
    /// Manifolds unbounded, no contacts and no survey counter-evidence.
    pub conclusion_observed: bool,
    pub translation: Option<Point>,
    pub warnings: Vec<String>,
}

impl Certificate {
    pub fn hypothesis(&self, id: HypothesisId) -> &Hypothesis {
        self.hypotheses.iter().find(|h| h.id == id).expect("all hypotheses are evaluated")
    }

    pub fn satisfied_rules(&self) -> Vec<Rule> {
        self.rules.iter().filter(|r| r.satisfied).map(|r| r.rule).collect()
    }
}

fn status_from(ok: bool, witness: Option<Point>, reason: &str) -> HypothesisStatus {
    match (ok, witness) {
        (true, _) => HypothesisStatus::VerifiedOnRegion,
        (false, Some(w)) => HypothesisStatus::Refuted { witness: w },
        (false, None) => HypothesisStatus::Unresolved { reason: reason.to_string() },
    }
}

/// The point of `pts` nearest the origin; ties go to larger x, then larger y.
fn nearest_to_origin(pts: impl Iterator<Item = Point>) -> Option<Point> {
    pts.min_by(|a, b| a.norm().total_cmp(&b.norm()).then(b.x.total_cmp(&a.x)).then(b.y.total_cmp(&a.y)))
}

fn gather_hypotheses(
    m: &MapSpec,
    origin: &Result<FixedPointRecord, String>,
    census: &Census,
    census2: &Census,
    gap: &SpectrumGapReport,
    orient: &OrientationReport,
    sym: &SymmetryReport,
) -> Vec<Hypothesis> {
    use HypothesisId::*;
    let mut out = Vec::new();
    let o = Point::ORIGIN;
    let f0 = m.eval(o);
    out.push(Hypothesis {
        id: OriginFixed,
        status: match &f0 {
            Ok(q) if q.norm() <= ORIGIN_TOL => HypothesisStatus::VerifiedOnRegion,
            Ok(_) => HypothesisStatus::Refuted { witness: o },
            Err(e) => HypothesisStatus::Unresolved { reason: e.to_string() },
        },
        evidence: match &f0 {
            Ok(q) => format!("|f(0)| = {:e}", q.norm()),
            Err(e) => format!("f(0) failed: {e}"),
        },
    });

    let others = census.points.iter().map(|r| r.location).filter(|p| p.dist(o) > census_tol(census));
    let other = nearest_to_origin(others);
    let has_origin = census.points.iter().any(|r| r.location.dist(o) <= census_tol(census));
    out.push(Hypothesis {
        id: UniqueFixedPoint,
        status: status_from(has_origin && other.is_none(), other, "origin not found by the census"),
        evidence: format!(
            "census: {} fixed points from {} seeds ({} unconverged, {} singular)",
            census.points.len(),
            census.seeds,
            census.unconverged,
            census.skipped_singular
        ),
    });

    let (saddle, evidence) = match origin {
        Ok(r) => (
            Some(r.saddle_kind),
            format!(
                "eigenvalues {:.6e}{:+.6e}i, {:.6e}{:+.6e}i; {}",
                r.eigenvalues[0].re,
                r.eigenvalues[0].im,
                r.eigenvalues[1].re,
                r.eigenvalues[1].im,
                r.saddle_kind.label()
            ),
        ),
        Err(e) => (None, e.clone()),
    };
    let local = match saddle {
        Some(k) => status_from(k.is_saddle(), Some(o), ""),
        None => HypothesisStatus::Unresolved { reason: evidence.clone() },
    };
    out.push(Hypothesis { id: LocalSaddle, status: local, evidence: evidence.clone() });
    let direct = match saddle {
        Some(k) => status_from(k == SaddleKind::Direct, Some(o), ""),
        None => HypothesisStatus::Unresolved { reason: evidence.clone() },
    };
    out.push(Hypothesis { id: DirectSaddle, status: direct, evidence });

    let f2_other = nearest_to_origin(
        census2.points.iter().map(|r| r.location).filter(|p| p.dist(o) > census_tol(census2)),
    );
    out.push(Hypothesis {
        id: FixF2Trivial,
        status: status_from(has_origin && f2_other.is_none(), f2_other, "origin not found by the census"),
        evidence: format!("Fix(f^2) census: {} points", census2.points.len()),
    });
    let p2 = nearest_to_origin(census2.genuine_period2.iter().map(|r| r.location));
    out.push(Hypothesis {
        id: NoPeriod2,
        status: status_from(p2.is_none(), p2, ""),
        evidence: format!("{} genuine period-2 points", census2.genuine_period2.len()),
    });

    let all_failed = gap.eval_failures == gap.sample_count;
    out.push(Hypothesis {
        id: SpectrumGap,
        status: if all_failed {
            HypothesisStatus::Unresolved { reason: "no Jacobian could be evaluated".into() }
        } else {
            status_from(gap.holds_on_samples, gap.violation_points.first().map(|v| v.0), "")
        },
        evidence: format!(
            "epsilon = {}, {} samples, {} violations, {} failures",
            gap.epsilon,
            gap.sample_count,
            gap.violation_points.len(),
            gap.eval_failures
        ),
    });

    let all_failed = orient.eval_failures == orient.sample_count;
    let orient_evidence = format!(
        "{} on {} samples ({} failures)",
        orient.orientation.label(),
        orient.sample_count,
        orient.eval_failures
    );
    let unresolved = || HypothesisStatus::Unresolved { reason: "no Jacobian could be evaluated".into() };
    out.push(Hypothesis {
        id: OrientationPreserving,
        status: if all_failed {
            unresolved()
        } else {
            status_from(orient.orientation == Orientation::Preserving, orient.non_positive_at, "")
        },
        evidence: orient_evidence.clone(),
    });
    let consistent_witness = match orient.orientation {
        Orientation::Mixed(_, b) => Some(b),
        _ => None,
    };
    out.push(Hypothesis {
        id: OrientationConsistent,
        status: if all_failed { unresolved() } else { status_from(consistent_witness.is_none(), consistent_witness, "") },
        evidence: orient_evidence,
    });

    let worst_kappa = [GroupElement::KappaX, GroupElement::KappaY]
        .into_iter()
        .min_by(|a, b| sym.residual(*a).total_cmp(&sym.residual(*b)))
        .unwrap();
    let residuals = sym
        .residuals
        .iter()
        .map(|(g, r)| format!("{}={:e}", g.label(), r))
        .collect::<Vec<_>>()
        .join(", ");
    out.push(Hypothesis {
        id: SymmetryKappa,
        status: status_from(sym.group.has_reflection(), sym.worst_point(worst_kappa), ""),
        evidence: format!("group {}; {residuals}", sym.group.label()),
    });
    let d2_witness = [GroupElement::KappaX, GroupElement::KappaY]
        .into_iter()
        .find(|g| !sym.passes(*g))
        .and_then(|g| sym.worst_point(g));
    out.push(Hypothesis {
        id: SymmetryD2,
        status: status_from(sym.group == SymmetryGroup::D2, d2_witness, ""),
        evidence: format!("group {}; {residuals}", sym.group.label()),
    });
    out
}

fn census_tol(c: &Census) -> f64 {
    let _ = c;
    crate::fixed_points::MERGE_TOL.max(ORIGIN_TOL)
}

/// Gather evidence on `region` and apply the first satisfied rule.
pub fn certify(m: &MapSpec, region: Rect, config: &CertifyConfig) -> Certificate {
    let census = find_fixed_points(m, region, 1, &config.census);
    let census2 = find_fixed_points(m, region, 2, &config.census);
    let origin = classify_local(m, Point::ORIGIN).map_err(|e| e.to_string());
    let orient = orientation(m, region, config.orientation_samples);
    let gap = spectrum_gap(m, region, config.epsilon, config.gap_samples);
    let sym = detect_symmetry(m, region, config.symmetry_samples.max(100));
    let hypotheses = gather_hypotheses(m, &origin, &census, &census2, &gap, &orient, &sym);

    let verified = |id: HypothesisId| hypotheses.iter().any(|h| h.id == id && h.verified());
    let rules: Vec<RuleEvaluation> = Rule::ORDER
        .iter()
        .map(|&rule| {
            let missing: Vec<HypothesisId> = rule.hypotheses().iter().copied().filter(|h| !verified(*h)).collect();
            RuleEvaluation { rule, satisfied: missing.is_empty(), missing }
        })
        .collect();
    let fired = rules.iter().find(|r| r.satisfied).map(|r| r.rule);
    let mut verdict = if fired.is_some() { Verdict::GlobalSaddle } else { Verdict::NotCertified };
    let mut warnings: Vec<String> = sym.warnings.clone();
    let mut conditional = false;
    if let Err(fault) = gap_consistency(&gap, &census) {
        verdict = Verdict::NotCertified;
        warnings.push(fault);
    }

    let quadrants = fired.and_then(|r| r.component_action()).map(|_| {
        quadrant_check(m, region, config.quadrant_samples, config.seed)
    });
    if let (Some(rule), Some(q)) = (fired, &quadrants) {
        let ok = match rule.component_action() {
            Some(ComponentAction::FourInvariant) => q.invariant,
            _ => q.consistent,
        };
        if !ok {
            verdict = Verdict::NotCertified;
            warnings.push(format!("quadrant check contradicts {}: {:?}", rule.label(), q.permutation));
        }
    }

    let corroboration = match (&origin, &config.manifolds) {
        (Ok(rec), Some(params)) if rec.saddle_kind.is_saddle() => {
            let ws = grow_stable(m, rec, params).expect("saddle checked");
            let wu = grow_unstable(m, rec, params).expect("saddle checked");
            let excl = 10.0 * params.delta_seed(rec.location);
            let contacts = find_contacts(&ws, &wu, rec.location, excl, CONTACT_TOL);
            Some(Corroboration { stable: ws.to_vec(), unstable: wu.to_vec(), contacts, survey: None })
        }
        _ => None,
    };
    let mut corroboration = corroboration;
    if config.survey_points > 0 {
        let survey = trivial_dynamics_survey(m, region, config.survey_points, &census.locations(), config.seed);
        match &mut corroboration {
            Some(c) => c.survey = Some(survey),
            None => {
                corroboration = Some(Corroboration {
                    stable: Vec::new(),
                    unstable: Vec::new(),
                    contacts: ContactReport { contacts: Vec::new(), tolerance: CONTACT_TOL, exclusion_radius: 0.0 },
                    survey: Some(survey),
                })
            }
        }
    }
    if let Some(c) = &corroboration {
        if verdict == Verdict::GlobalSaddle {
            if !c.contacts.contacts.is_empty() {
                verdict = Verdict::NotCertified;
                warnings.push(format!("{} candidate homoclinic contacts", c.contacts.contacts.len()));
            }
            for b in c.branches() {
                match &b.verdict {
                    BranchVerdict::Bounded { .. } => {
                        verdict = Verdict::NotCertified;
                        warnings.push(format!("branch {} is bounded", b.branch.label()));
                    }
                    BranchVerdict::BudgetExhausted { reason } => {
                        conditional = true;
                        warnings.push(format!("branch {} not resolved: {reason}", b.branch.label()));
                    }
                    BranchVerdict::Unbounded => {}
                }
            }
        }
        if let Some(s) = &c.survey {
            if !s.highlighted.is_empty() {
                warnings.push(format!("survey: {} orbits are not trivial-dynamics compatible", s.highlighted.len()));
            }
        }
    }
    if verdict == Verdict::NotCertified {
        conditional = false;
    }
    let conclusion_observed = corroboration.as_ref().is_some_and(|c| {
        !c.stable.is_empty()
            && c.all_unbounded()
            && c.contacts.contacts.is_empty()
            && c.survey.as_ref().is_none_or(|s| s.highlighted.is_empty())
    });

    let mut tolerances = vec![
        ("origin_tol", ORIGIN_TOL),
        ("epsilon", config.epsilon),
        ("merge_tol", config.census.merge_tol),
        ("residual_tol", config.census.residual_tol),
        ("equivariance_tol", sym.tolerance),
        ("hyperbolicity_band", crate::fixed_points::HYPERBOLICITY_BAND),
    ];
    if let Some(p) = &config.manifolds {
        tolerances.push(("h_max", p.h_max));
        tolerances.push(("r_escape", p.r_escape));
        tolerances.push(("budget", p.budget));
        tolerances.push(("contact_tol", CONTACT_TOL));
    }
    Certificate {
        map_name: m.name.clone(),
        verdict,
        conditional,
        rule: fired,
        rules,
        hypotheses,
        region,
        tolerances,
        component_action: if verdict == Verdict::GlobalSaddle { fired.and_then(Rule::component_action) } else { None },
        origin: origin.ok(),
        census,
        census2,
        gap,
        orientation: orient,
        symmetry: sym,
        quadrants,
        corroboration,
        conclusion_observed,
        translation: m.translation,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveIndex {
    pub curve: JordanCurve,
    pub index: Result<i32, IndexError>,
    /// Index exactly 1: the freeness precondition fails on this curve.
    pub flagged: bool,
}

/// Index of `f` on each curve; curves with index 1 are flagged.
pub fn check_free_precondition(m: &MapSpec, curves: &[JordanCurve]) -> Vec<CurveIndex> {
    curves
        .iter()
        .map(|c| {
            let index = fixed_point_index(m.forward().as_ref(), c, &IndexParams::default()).map(|r| r.degree);
            CurveIndex { curve: c.clone(), flagged: index == Ok(1), index }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveySummary {
    pub points: usize,
    /// Verdict label and count, in a fixed order.
    pub omega_counts: Vec<(&'static str, usize)>,
    pub alpha_counts: Vec<(&'static str, usize)>,
    /// Orbits converging to a period-2 orbit or unresolved: `(point, "omega" | "alpha", verdict)`.
    pub highlighted: Vec<(Point, &'static str, OrbitVerdict)>,
}

const VERDICT_LABELS: [&str; 4] = ["CONVERGES_TO_FIXED", "CONVERGES_TO_PERIOD2", "ESCAPES", "UNRESOLVED"];

/// Classify the forward and backward limit sets of `n_points` random points
/// of `region`.
pub fn trivial_dynamics_survey(
    m: &MapSpec,
    region: Rect,
    n_points: usize,
    known_fixed: &[Point],
    seed: u64,
) -> SurveySummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point> =
        (0..n_points).map(|_| Point::new(rng.gen_range(region.x0..region.x1), rng.gen_range(region.y0..region.y1))).collect();
    survey_points(m, &pts, known_fixed)
}

/// As [`trivial_dynamics_survey`] on given points.
pub fn survey_points(m: &MapSpec, pts: &[Point], known_fixed: &[Point]) -> SurveySummary {
    let params = OrbitParams::default();
    let rows: Vec<(OrbitVerdict, OrbitVerdict)> = pts
        .par_iter()
        .map(|&p| {
            (
                classify_omega(m, p, known_fixed, &params).verdict,
                classify_alpha(m, p, known_fixed, &params).verdict,
            )
        })
        .collect();
    let mut omega = [0usize; 4];
    let mut alpha = [0usize; 4];
    let mut highlighted = Vec::new();
    let slot = |v: &OrbitVerdict| VERDICT_LABELS.iter().position(|l| *l == v.label()).unwrap();
    for (p, (w, a)) in pts.iter().zip(rows) {
        omega[slot(&w)] += 1;
        alpha[slot(&a)] += 1;
        for (which, v) in [("omega", w), ("alpha", a)] {
            if matches!(v, OrbitVerdict::ConvergesToPeriod2(..) | OrbitVerdict::Unresolved) {
                highlighted.push((*p, which, v));
            }
        }
    }
    SurveySummary {
        points: pts.len(),
        omega_counts: VERDICT_LABELS.iter().copied().zip(omega).collect(),
        alpha_counts: VERDICT_LABELS.iter().copied().zip(alpha).collect(),
        highlighted,
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_p(p: Point) -> String {
    format!("{},{}", fmt_f(p.x), fmt_f(p.y))
}

impl Certificate {
    /// Flat `key=value` lines, schema `cert-v1`.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("schema", "cert-v1".into());
        kv("map", self.map_name.clone());
        kv("verdict", self.verdict.label().into());
        kv("conditional", self.conditional.to_string());
        kv("scope", "region-bounded".into());
        kv("region", format!("{},{},{},{}", fmt_f(self.region.x0), fmt_f(self.region.x1), fmt_f(self.region.y0), fmt_f(self.region.y1)));
        kv("rule", self.rule.map_or("none", Rule::label).into());
        kv("component_action", self.component_action.map_or("none", ComponentAction::label).into());
        kv("translation", self.translation.map_or("none".into(), fmt_p));
        for r in &self.rules {
            let missing: Vec<&str> = r.missing.iter().map(|h| h.label()).collect();
            kv(&format!("rule.{}.satisfied", r.rule.label()), r.satisfied.to_string());
            kv(&format!("rule.{}.missing", r.rule.label()), if missing.is_empty() { "none".into() } else { missing.join(",") });
        }
        for h in &self.hypotheses {
            let k = format!("hypothesis.{}", h.id.label());
            kv(&format!("{k}.status"), h.status.label().into());
            match &h.status {
                HypothesisStatus::Refuted { witness } => kv(&format!("{k}.witness"), fmt_p(*witness)),
                HypothesisStatus::Unresolved { reason } => kv(&format!("{k}.reason"), reason.clone()),
                HypothesisStatus::VerifiedOnRegion => {}
            }
            kv(&format!("{k}.evidence"), h.evidence.clone());
        }
        for (name, v) in &self.tolerances {
            kv(&format!("tolerance.{name}"), fmt_f(*v));
        }
        if let Some(o) = &self.origin {
            kv("origin.saddle_kind", o.saddle_kind.label().into());
            for (i, e) in o.eigenvalues.iter().enumerate() {
                kv(&format!("origin.eigenvalue.{i}"), format!("{},{}", fmt_f(e.re), fmt_f(e.im)));
            }
        }
        for (i, r) in self.census.points.iter().enumerate() {
            kv(&format!("census.period1.{i}"), fmt_p(r.location));
        }
        for (i, r) in self.census2.points.iter().enumerate() {
            kv(&format!("census.period2.{i}"), fmt_p(r.location));
        }
        kv("symmetry.group", self.symmetry.group.label().into());
        kv("orientation", self.orientation.orientation.label().into());
        kv("spectrum_gap.holds", self.gap.holds_on_samples.to_string());
        if let Some(q) = &self.quadrants {
            kv("quadrants.samples", q.samples.to_string());
            kv("quadrants.invariant", q.invariant.to_string());
            kv("quadrants.consistent", q.consistent.to_string());
        }
        if let Some(c) = &self.corroboration {
            for b in c.branches() {
                let k = format!("manifold.{}", b.branch.label());
                kv(&format!("{k}.verdict"), b.verdict.label().into());
                kv(&format!("{k}.points"), b.points.len().to_string());
                kv(&format!("{k}.arclength"), fmt_f(b.arclength));
                if let BranchVerdict::Bounded { limit_set } = &b.verdict {
                    for (i, l) in limit_set.iter().enumerate() {
                        kv(&format!("{k}.limit.{i}"), fmt_p(*l));
                    }
                }
            }
            kv("contacts.count", c.contacts.contacts.len().to_string());
            for (i, ct) in c.contacts.contacts.iter().enumerate() {
                kv(&format!("contacts.{i}"), format!("{},{}", ct.kind.label(), fmt_p(ct.point)));
            }
            if let Some(sv) = &c.survey {
                kv("survey.points", sv.points.to_string());
                for (l, n) in &sv.omega_counts {
                    kv(&format!("survey.omega.{l}"), n.to_string());
                }
                for (l, n) in &sv.alpha_counts {
                    kv(&format!("survey.alpha.{l}"), n.to_string());
                }
                kv("survey.highlighted", sv.highlighted.len().to_string());
            }
        }
        kv("conclusion", if self.conclusion_observed { "observed" } else { "not-observed" }.into());
        for (i, w) in self.warnings.iter().enumerate() {
            kv(&format!("warning.{i}"), w.clone());
        }
        s
    }

    /// A readable report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Certificate for {}", self.map_name);
        let _ = writeln!(
            s,
            "verdict: {}{}",
            self.verdict.label(),
            if self.conditional { " (conditional: manifold growth unresolved within budget)" } else { "" }
        );
        let _ = writeln!(s, "region: {} (all checks are bounded to this region)", self.region);
        if let Some(t) = self.translation {
            let _ = writeln!(s, "origin translated from {t}");
        }
        match self.rule {
            Some(r) => {
                let _ = writeln!(s, "rule: {}", r.label());
                if self.verdict == Verdict::GlobalSaddle {
                    let _ = writeln!(s, "the rule's hypotheses hold on the region, so the conclusion follows from the theorem");
                } else {
                    let _ = writeln!(s, "the rule's hypotheses hold on the region, but the numerical evidence below contradicts the conclusion");
                }
            }
            None => {
                let _ = writeln!(s, "rule: none applies");
            }
        }
        if let Some(a) = self.component_action {
            let _ = writeln!(s, "components: {}", a.label());
        }
        let _ = writeln!(s, "hypotheses:");
        for h in &self.hypotheses {
            let extra = match &h.status {
                HypothesisStatus::Refuted { witness } => format!(" witness {witness}"),
                HypothesisStatus::Unresolved { reason } => format!(" ({reason})"),
                HypothesisStatus::VerifiedOnRegion => String::new(),
            };
            let _ = writeln!(s, "  {:24} {}{}  [{}]", h.id.label(), h.status.label(), extra, h.evidence);
        }
        let _ = writeln!(s, "rules:");
        for r in &self.rules {
            let missing: Vec<&str> = r.missing.iter().map(|h| h.label()).collect();
            let _ = writeln!(
                s,
                "  {:28} {}",
                r.rule.label(),
                if r.satisfied { "satisfied".to_string() } else { format!("missing {}", missing.join(", ")) }
            );
        }
        if let Some(c) = &self.corroboration {
            let _ = writeln!(s, "corroboration:");
            for b in c.branches() {
                let _ = writeln!(s, "  {:15} {:17} {} points", b.branch.label(), b.verdict.label(), b.points.len());
            }
            let _ = writeln!(s, "  candidate contacts: {}", c.contacts.contacts.len());
            if let Some(sv) = &c.survey {
                let _ = writeln!(s, "  survey of {} points: {} highlighted", sv.points, sv.highlighted.len());
            }
            let _ = writeln!(
                s,
                "  conclusion {}",
                if self.conclusion_observed { "independently observed" } else { "not independently observed" }
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> CertifyConfig {
        CertifyConfig {
            gap_samples: 2000,
            orientation_samples: 2000,
            symmetry_samples: 200,
            census: CensusParams { grid: 24, ..CensusParams::default() },
            survey_points: 0,
            manifolds: None,
            ..CertifyConfig::default()
        }
    }

    #[test]
    fn pd2_example_fires_first_rule() {
        let m = MapSpec::parse("pd2", Rect::square(10.0), "2*x*(1+y^2)", "y/3");
        let c = certify(&m, m.region, &quick());
        assert_eq!(c.verdict, Verdict::GlobalSaddle);
        assert_eq!(c.rule, Some(Rule::D2SpectrumGapA));
        assert_eq!(c.component_action, Some(ComponentAction::FourInvariant));
        assert!(c.quadrants.as_ref().unwrap().invariant);
    }

    #[test]
    fn twisted_example_is_refuted_at_period_two_point() {
        let m = MapSpec::parse("twisted", Rect::square(3.0), "-0.5*x^3 + (0.5-1)*x", "-2*y");
        let c = certify(&m, m.region, &quick());
        assert_eq!(c.verdict, Verdict::NotCertified);
        assert_eq!(c.rule, None);
        match &c.hypothesis(HypothesisId::FixF2Trivial).status {
            HypothesisStatus::Refuted { witness } => assert!(witness.dist(Point::new(1.0, 0.0)) < 1e-8),
            s => panic!("{s:?}"),
        }
        assert!(c.component_action.is_none());
    }

    #[test]
    fn phi_variants() {
        let d = MapSpec::parse("phi", Rect::square(5.0), "x*(1+atan(x)^2)/(4+pi^2)", "2*y");
        let c = certify(&d, d.region, &quick());
        assert_eq!(c.rule, Some(Rule::D2SpectrumGapA));
        assert!(c.satisfied_rules().contains(&Rule::ReflectionSaddleA));
        let t = MapSpec::parse("phi-", Rect::square(5.0), "x*(1+atan(x)^2)/(4+pi^2)", "-2*y");
        let c = certify(&t, t.region, &quick());
        assert_eq!(c.verdict, Verdict::GlobalSaddle);
        assert_eq!(c.rule, Some(Rule::D2SpectrumGapB));
        assert!(c.satisfied_rules().contains(&Rule::NoPeriodTwoSaddle));
    }

    #[test]
    fn free_precondition_flags_index_one() {
        let tw = MapSpec::parse("twisted", Rect::square(3.0), "-0.5*x^3 + (0.5-1)*x", "-2*y");
        let r = check_free_precondition(&tw, &[JordanCurve::circle(Point::ORIGIN, 0.5).unwrap()]);
        assert!(r[0].flagged && r[0].index == Ok(1));
        let lin = MapSpec::parse("lin", Rect::square(3.0), "2*x", "y/2");
        let curves = [JordanCurve::circle(Point::ORIGIN, 1.0).unwrap(), JordanCurve::circle(Point::new(5.0, 5.0), 1.0).unwrap()];
        let r = check_free_precondition(&lin, &curves);
        assert_eq!(r[0].index, Ok(-1));
        assert_eq!(r[1].index, Ok(0));
        assert!(r.iter().all(|c| !c.flagged));
    }

    #[test]
    fn survey_examples() {
        let pd2 = MapSpec::parse("pd2", Rect::square(10.0), "2*x*(1+y^2)", "y/3");
        let s = trivial_dynamics_survey(&pd2, pd2.region, 500, &[Point::ORIGIN], 42);
        assert!(s.highlighted.is_empty(), "{:?}", s.highlighted.first());
        let tw = MapSpec::parse("twisted", Rect::square(3.0), "-0.5*x^3 + (0.5-1)*x", "-2*y");
        let s = survey_points(&tw, &[Point::new(0.999, 0.001)], &[Point::ORIGIN]);
        assert!(s.highlighted.iter().any(|(_, w, v)| *w == "alpha" && matches!(v, OrbitVerdict::ConvergesToPeriod2(..))));
    }

    #[test]
    fn key_values_are_deterministic() {
        let m = MapSpec::parse("lin", Rect::square(3.0), "2*x", "y/2");
        let cfg = CertifyConfig { manifolds: Some(ManifoldParams::default()), survey_points: 50, ..quick() };
        let a = certify(&m, m.region, &cfg).to_key_values();
        let b = certify(&m, m.region, &cfg).to_key_values();
        assert_eq!(a, b);
        assert!(a.contains("verdict=GLOBAL_SADDLE\n"));
        assert!(a.contains("scope=region-bounded\n"));
    }
}
