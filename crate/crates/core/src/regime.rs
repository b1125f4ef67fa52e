//! Well-posedness map in reciprocal exponent space.
//!
//! A query is a point `(d, 1/α, 1/p, 1/q)`: `b ∈ L^α_t L^p_x`, `u ∈ L^∞_t L^q_x`.
//! The flags form a chain
//!
//! ```text
//! all_distributional_parabolic ⇒ parabolic_unique ⇒ parabolic_exists
//!     ⇒ distributional_exists ⇔ product_defined
//! ```
//!
//! and every flag region is closed and a down-set in each reciprocal.
//! Boundary comparisons allow `1e-12` slack so that sums like `1/3 + 1/6`
//! land on the closed side.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::par;

const SLACK: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b + SLACK
}

fn eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= SLACK
}

fn gt(a: f64, b: f64) -> bool {
    a > b + SLACK
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeQuery {
    pub d: usize,
    pub inv_alpha: f64,
    pub inv_p: f64,
    pub inv_q: f64,
}

impl RegimeQuery {
    pub fn new(d: usize, inv_alpha: f64, inv_p: f64, inv_q: f64) -> Result<Self> {
        let q = RegimeQuery { d, inv_alpha, inv_p, inv_q };
        q.validate()?;
        Ok(q)
    }

    /// From exponents in `[1, ∞]`.
    pub fn from_exponents(d: usize, alpha: Exponent, p: Exponent, q: Exponent) -> Result<Self> {
        for e in [alpha, p, q] {
            Exponent::lebesgue(e.value())?;
        }
        Self::new(d, alpha.reciprocal(), p.reciprocal(), q.reciprocal())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidExponent("dimension must be >= 1".into()));
        }
        for (name, v) in [("inv_alpha", self.inv_alpha), ("inv_p", self.inv_p), ("inv_q", self.inv_q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidExponent(format!("{name} = {v} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Known nonuniqueness results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NonuniquenessTag {
    /// Infinitely many solutions in `C_t H¹` for `p < 2d/(d+2)`.
    #[serde(rename = "CIH1")]
    Cih1,
    /// Distributional nonuniqueness on `1/p + 1/q = 1` with `p < d`, `d ≥ 3`.
    #[serde(rename = "DISTR")]
    Distr,
    /// Distributional nonuniqueness at `p = q = 2`, `d ≥ 3`, despite a unique
    /// parabolic solution.
    #[serde(rename = "P2Q2")]
    P2q2,
}

impl fmt::Display for NonuniquenessTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NonuniquenessTag::Cih1 => "CIH1",
            NonuniquenessTag::Distr => "DISTR",
            NonuniquenessTag::P2q2 => "P2Q2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpenQuestion {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
}

/// `(statement id, anchor)`; the anchor restates the statement's hypothesis
/// and conclusion in formula form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub statement: String,
    pub anchor: String,
}

fn cite(statement: &str, anchor: &str) -> Citation {
    Citation { statement: statement.into(), anchor: anchor.into() }
}

pub fn citation_product_defined() -> Citation {
    cite(
        "definition:distributional-solution",
        "u b is locally integrable when 1/p + 1/q <= 1",
    )
}

pub fn citation_product_undefined() -> Citation {
    cite(
        "definition:distributional-solution",
        "1/p + 1/q > 1: u b need not be integrable, no distributional formulation",
    )
}

pub fn citation_distributional_exists() -> Citation {
    cite(
        "proposition:existence",
        "b in L^1_t L^p_x divergence-free, u0 in L^q, 1/p + 1/q <= 1 => a distributional solution in L^inf_t L^q_x exists",
    )
}

pub fn citation_parabolic_exists() -> Citation {
    cite(
        "proposition:parabolic-existence",
        "b in L^1_t L^2_x divergence-free, u0 in L^2 => a solution in L^inf_t L^2_x with grad u in L^2_t L^2_x exists",
    )
}

pub fn citation_parabolic_unique() -> Citation {
    cite(
        "theorem:uniqueness",
        "b in L^2_t L^2_x divergence-free => at most one parabolic solution",
    )
}

pub fn citation_all_parabolic() -> Citation {
    cite(
        "theorem:regularity",
        "b in L^2_t L^p_x, u in L^inf_t L^q_x, 1/p + 1/q <= 1/2 => every distributional solution lies in L^2_t H^1_x and satisfies the energy balance",
    )
}

pub fn citation_for(tag: NonuniquenessTag) -> Citation {
    match tag {
        NonuniquenessTag::Cih1 => cite(
            "nonuniqueness:CIH1",
            "1 <= p < 2d/(d+2): infinitely many solutions in C_t H^1_x",
        ),
        NonuniquenessTag::Distr => cite(
            "nonuniqueness:DISTR",
            "d >= 3, 1/p + 1/q = 1, p < d: distributional solutions are not unique",
        ),
        NonuniquenessTag::P2q2 => cite(
            "nonuniqueness:P2Q2",
            "d >= 3, p = q = 2: infinitely many distributional solutions while the parabolic one is unique",
        ),
    }
}

pub fn open_question_text(q: OpenQuestion) -> &'static str {
    match q {
        OpenQuestion::Q1 => "2d/(d+2) <= p < 2: uniqueness or nonuniqueness of parabolic solutions",
        OpenQuestion::Q2 => "2d/(d+2) <= p < 2 with b only in L^alpha_t, alpha <= 2",
        OpenQuestion::Q3 => "p >= 2 but b in L^alpha_t with alpha < 2: uniqueness of parabolic solutions",
        OpenQuestion::Q4 => "1/p + 1/q <= 1/2 but alpha < 2: are all distributional solutions parabolic",
        OpenQuestion::Q5 => "d = 2, p = q = 2: uniqueness of distributional solutions",
        OpenQuestion::Q6 => "1/2 < 1/p + 1/q < 1: uniqueness of distributional solutions",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedCitation {
    pub tag: NonuniquenessTag,
    pub citation: Citation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub query: RegimeQuery,
    pub product_defined: bool,
    pub distributional_exists: bool,
    pub parabolic_exists: bool,
    pub parabolic_unique: bool,
    pub all_distributional_parabolic: bool,
    pub known_nonuniqueness: Vec<TaggedCitation>,
    pub open_questions: Vec<OpenQuestion>,
    pub citations: Vec<Citation>,
}

impl RegimeReport {
    /// The implication chain between flags.
    pub fn is_coherent(&self) -> bool {
        let imp = |a: bool, b: bool| !a || b;
        imp(self.all_distributional_parabolic, self.parabolic_unique)
            && imp(self.parabolic_unique, self.parabolic_exists)
            && imp(self.parabolic_exists, self.distributional_exists)
            && imp(self.distributional_exists, self.product_defined)
    }

    pub fn flags(&self) -> [bool; 5] {
        [
            self.product_defined,
            self.distributional_exists,
            self.parabolic_exists,
            self.parabolic_unique,
            self.all_distributional_parabolic,
        ]
    }

    pub fn tags(&self) -> Vec<NonuniquenessTag> {
        self.known_nonuniqueness.iter().map(|t| t.tag).collect()
    }

    pub fn region(&self) -> Region {
        if self.all_distributional_parabolic {
            Region::AllParabolic
        } else if self.parabolic_unique {
            Region::ParabolicUnique
        } else if self.parabolic_exists {
            Region::ParabolicExists
        } else if self.distributional_exists {
            Region::Distributional
        } else {
            Region::Undefined
        }
    }
}

/// The flag combinations that can occur (they form a chain).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Undefined,
    Distributional,
    ParabolicExists,
    ParabolicUnique,
    AllParabolic,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::Undefined,
        Region::Distributional,
        Region::ParabolicExists,
        Region::ParabolicUnique,
        Region::AllParabolic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Region::Undefined => "undefined",
            Region::Distributional => "distributional",
            Region::ParabolicExists => "parabolic_exists",
            Region::ParabolicUnique => "parabolic_unique",
            Region::AllParabolic => "all_parabolic",
        }
    }

    fn fill(self) -> &'static str {
        match self {
            Region::Undefined => "#ffffff",
            Region::Distributional => "#3a3a3a",
            Region::ParabolicExists => "#9ab7d3",
            Region::ParabolicUnique => "#2f6fb0",
            Region::AllParabolic => "#c8372d",
        }
    }

    fn citations(self) -> Vec<Citation> {
        let mut c = Vec::new();
        if self == Region::Undefined {
            return vec![citation_product_undefined()];
        }
        c.push(citation_product_defined());
        c.push(citation_distributional_exists());
        if self >= Region::ParabolicExists {
            c.push(citation_parabolic_exists());
        }
        if self >= Region::ParabolicUnique {
            c.push(citation_parabolic_unique());
        }
        if self >= Region::AllParabolic {
            c.push(citation_all_parabolic());
        }
        c
    }
}

/// Classifies a query point.
pub fn classify(q: &RegimeQuery) -> Result<RegimeReport> {
    q.validate()?;
    let (d, ia, ip, iq) = (q.d, q.inv_alpha, q.inv_p, q.inv_q);
    let df = d as f64;
    let half = 0.5;

    let product_defined = le(ip + iq, 1.0);
    if !product_defined {
        return Ok(RegimeReport {
            query: *q,
            product_defined: false,
            distributional_exists: false,
            parabolic_exists: false,
            parabolic_unique: false,
            all_distributional_parabolic: false,
            known_nonuniqueness: Vec::new(),
            open_questions: Vec::new(),
            citations: vec![citation_product_undefined()],
        });
    }
    let distributional_exists = product_defined;
    let parabolic_exists = le(ip, half) && le(iq, half);
    let parabolic_unique = parabolic_exists && le(ia, half);
    let all_distributional_parabolic = le(ia, half) && le(ip + iq, half);

    let critical = (df + 2.0) / (2.0 * df);
    let mut tags = Vec::new();
    if gt(ip, critical) {
        tags.push(NonuniquenessTag::Cih1);
    }
    if d > 2 && eq(ip + iq, 1.0) && gt(ip, 1.0 / df) {
        tags.push(NonuniquenessTag::Distr);
    }
    if d > 2 && eq(ip, half) && eq(iq, half) {
        tags.push(NonuniquenessTag::P2q2);
    }

    let mut open = Vec::new();
    let q1_range = le(ip, critical) && gt(ip, half);
    if q1_range {
        open.push(OpenQuestion::Q1);
        if le(half, ia) {
            open.push(OpenQuestion::Q2);
        }
    }
    if gt(ia, half) && le(ip, half) {
        open.push(OpenQuestion::Q3);
    }
    if gt(ia, half) && le(ip + iq, half) {
        open.push(OpenQuestion::Q4);
    }
    if d == 2 && eq(ip, half) && eq(iq, half) {
        open.push(OpenQuestion::Q5);
    }
    if gt(ip + iq, half) && ip + iq < 1.0 - SLACK {
        open.push(OpenQuestion::Q6);
    }

    let report = RegimeReport {
        query: *q,
        product_defined,
        distributional_exists,
        parabolic_exists,
        parabolic_unique,
        all_distributional_parabolic,
        known_nonuniqueness: tags
            .into_iter()
            .map(|tag| TaggedCitation { tag, citation: citation_for(tag) })
            .collect(),
        open_questions: open,
        citations: Vec::new(),
    };
    let citations = report.region().citations();
    Ok(RegimeReport { citations, ..report })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionCell {
    pub inv_p: f64,
    pub inv_q: f64,
    pub report: RegimeReport,
}

/// Raster of the `(1/p, 1/q)` square at fixed `1/α`, nodes `i/(R−1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionMap {
    pub d: usize,
    pub inv_alpha: f64,
    pub resolution: usize,
    /// Row-major: `cells[i·R + j]` has `1/p = i/(R−1)`, `1/q = j/(R−1)`.
    pub cells: Vec<RegionCell>,
}

pub fn emit_region_map(d: usize, inv_alpha: f64, resolution: usize) -> Result<RegionMap> {
    if resolution < 16 {
        return Err(Error::InvalidConfig(format!("resolution {resolution} must be >= 16")));
    }
    RegimeQuery::new(d, inv_alpha, 0.0, 0.0)?;
    let r = resolution;
    let step = 1.0 / (r - 1) as f64;
    let cells = par::map_range(r * r, |k| {
        let (i, j) = (k / r, k % r);
        let (ip, iq) = (i as f64 * step, j as f64 * step);
        let report = classify(&RegimeQuery { d, inv_alpha, inv_p: ip, inv_q: iq })
            .expect("raster nodes are valid queries");
        RegionCell { inv_p: ip, inv_q: iq, report }
    });
    Ok(RegionMap { d, inv_alpha, resolution, cells })
}

impl RegionMap {
    pub fn cell(&self, i: usize, j: usize) -> &RegionCell {
        &self.cells[i * self.resolution + j]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "inv_p",
            "inv_q",
            "region",
            "product_defined",
            "distributional_exists",
            "parabolic_exists",
            "parabolic_unique",
            "all_distributional_parabolic",
            "nonuniqueness",
            "open_questions",
        ])?;
        for c in &self.cells {
            let r = &c.report;
            let tags: Vec<String> = r.tags().iter().map(|t| t.to_string()).collect();
            let open: Vec<String> = r.open_questions.iter().map(|q| format!("{q:?}")).collect();
            let mut row = vec![format!("{:.6}", c.inv_p), format!("{:.6}", c.inv_q)];
            row.push(r.region().label().into());
            row.extend(r.flags().iter().map(|f| f.to_string()));
            row.push(tags.join(";"));
            row.push(open.join(";"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Region diagram: `1/p` to the right, `1/q` upwards, one fill per flag
    /// combination and a legend with the supporting statements.
    pub fn to_svg(&self) -> String {
        let r = self.resolution;
        let size = 480.0;
        let cell = size / r as f64;
        let (ox, oy) = (70.0, 30.0);
        let present: Vec<Region> = Region::ALL
            .into_iter()
            .filter(|g| self.cells.iter().any(|c| c.report.region() == *g))
            .collect();
        let legend_h = 24.0 * present.len() as f64 + 20.0;
        let width = ox + size + 40.0;
        let height = oy + size + 60.0 + legend_h;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<title>d = {}, 1/alpha = {}</title>"#,
            self.d, self.inv_alpha
        );
        for c in &self.cells {
            let i = (c.inv_p * (r - 1) as f64).round();
            let j = (c.inv_q * (r - 1) as f64).round();
            let x = ox + i * cell;
            let y = oy + size - (j + 1.0) * cell;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{w:.3}" fill="{}" stroke="none"/>"#,
                c.report.region().fill(),
                w = cell + 0.01,
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{ox}" y="{oy}" width="{size}" height="{size}" fill="none" stroke="#000"/>"##
        );
        for (v, label) in [(0.0, "0"), (0.5, "1/2"), (1.0, "1")] {
            let x = ox + v * size;
            let y = oy + size - v * size;
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, oy + size + 16.0);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, ox - 6.0, y + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1/p</text>"#,
            ox + size / 2.0,
            oy + size + 34.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">1/q</text>"#,
            ox - 40.0,
            oy + size / 2.0,
            ox - 40.0,
            oy + size / 2.0
        );
        let mut y = oy + size + 56.0;
        for g in present {
            let cites: Vec<String> = g.citations().into_iter().map(|c| c.statement).collect();
            let _ = writeln!(
                s,
                r##"<rect x="{ox}" y="{:.1}" width="14" height="14" fill="{}" stroke="#000"/>"##,
                y - 11.0,
                g.fill()
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{y:.1}">{}: {}</text>"#,
                ox + 22.0,
                g.label(),
                cites.join(", ")
            );
            y += 24.0;
        }
        s.push_str("</svg>\n");
        s
    }
}
