#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Passes when `|residual| <= tol`.
    Equality,
    /// `residual` is a slack; passes when `slack >= -tol`.
    Inequality,
    /// Reported for reference, never fails.
    Info,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::Equality => "equality",
            Relation::Inequality => "inequality",
            Relation::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRecord {
    pub certificate: String,
    pub case: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: String,
}

impl CertificateRecord {
    pub fn judge(relation: Relation, residual: f64, tol: f64) -> bool {
        match relation {
            Relation::Equality => residual.abs() <= tol,
            Relation::Inequality => residual >= -tol,
            Relation::Info => true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CertificateReport {
    pub records: Vec<CertificateRecord>,
}

impl CertificateReport {
    pub fn push(&mut self, r: CertificateRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, other: CertificateReport) {
        self.records.extend(other.records);
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CertificateRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CertificateRecord> + 'a {
        self.records.iter().filter(move |r| r.certificate == name)
    }

    pub const HEADER: [&'static str; 9] = [
        "certificate",
        "case",
        "relation",
        "lhs",
        "rhs",
        "residual",
        "tol",
        "pass",
        "note",
    ];
}

/// `tol = constant · (h + dt) + floor`, with the constant fixed by a
/// refinement ladder before the checked run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceModel {
    pub constant: f64,
    pub floor: f64,
}

impl ToleranceModel {
    pub fn tol(&self, h: f64, dt: f64) -> f64 {
        self.constant * (h + dt) + self.floor
    }
}

/// Least-squares slope of `log(error)` against `log(h)` plus the pairwise
/// slopes between consecutive levels. `saturated` means every error sits at
/// or below the floor, where an order carries no information.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub pairwise: Vec<f64>,
    pub saturated: bool,
}

impl OrderFit {
    pub fn meets(&self, order: f64) -> bool {
        self.saturated || self.slope >= order
    }
}

/// `hs` and `errors` per level; errors below `floor` are lifted to it.
pub fn fit_order(hs: &[f64], errors: &[f64], floor: f64) -> OrderFit {
    assert_eq!(hs.len(), errors.len());
    let saturated = errors.iter().all(|&e| e <= floor);
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors
        .iter()
        .map(|&e| e.max(floor).max(f64::MIN_POSITIVE).ln())
        .collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let pairwise = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    OrderFit {
        slope,
        pairwise,
        saturated,
    }
}
