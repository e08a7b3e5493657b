use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest probability that may be discarded when a coherent state is cut
/// down to a finite Fock basis.
pub const TAIL_LIMIT: f64 = 1e-8;

/// Fock states `|0>..|n_max>` of one field mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockTruncation {
    n_max: usize,
}

impl FockTruncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Smallest truncation (never below the default of 12) that keeps the
    /// Poisson tail of a coherent state of amplitude `|alpha|` under
    /// [`TAIL_LIMIT`].
    pub fn for_coherent(alpha_abs: f64) -> Self {
        let mean = alpha_abs * alpha_abs;
        let mut n_max = 12;
        while poisson_tail(mean, n_max) >= TAIL_LIMIT {
            n_max += 1;
        }
        Self { n_max }
    }
}

impl Default for FockTruncation {
    fn default() -> Self {
        Self { n_max: 12 }
    }
}

/// `sum_{n > n_max} e^{-mean} mean^n / n!`, summed directly from the tail side.
pub(crate) fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // log-space first tail term, then accumulate until negligible
    let mut log_term = -mean + ((n_max + 1) as f64) * mean.ln() - ln_factorial(n_max + 1);
    let mut total = 0.0;
    let mut n = n_max + 1;
    loop {
        let term = log_term.exp();
        total += term;
        if term < total * 1e-17 || term == 0.0 {
            break;
        }
        n += 1;
        log_term += mean.ln() - (n as f64).ln();
        if n > n_max + 10_000 {
            break;
        }
    }
    total
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Ordered, unique atomic level labels.
///
/// The Λ probe uses `g, g', e, s` where `s` is a sink that collects
/// spontaneous emission from `e` and carries no coherent coupling. The
/// multimode probe uses `g0, g1, .., gN, e, s`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct AtomLevelSet {
    labels: Vec<String>,
}

pub const LEVEL_G: &str = "g";
pub const LEVEL_GP: &str = "g'";
pub const LEVEL_E: &str = "e";
pub const LEVEL_SINK: &str = "s";

impl AtomLevelSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidParameter("atom needs at least one level".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidParameter(format!("duplicate level label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    pub fn lambda() -> Self {
        Self { labels: [LEVEL_G, LEVEL_GP, LEVEL_E, LEVEL_SINK].map(String::from).to_vec() }
    }

    /// `(n+1)`-pod atom for `n_modes` field modes.
    pub fn pod(n_modes: usize) -> Self {
        let mut labels: Vec<String> = (0..=n_modes).map(|j| format!("g{j}")).collect();
        labels.push(LEVEL_E.into());
        labels.push(LEVEL_SINK.into());
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLevel(label.to_string()))
    }
}

impl TryFrom<Vec<String>> for AtomLevelSet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AtomLevelSet> for Vec<String> {
    fn from(a: AtomLevelSet) -> Self {
        a.labels
    }
}

/// One tensor factor of a [`Space`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Atom,
    Mode(usize),
}

/// Composite Hilbert space `atom ⊗ mode_0 ⊗ mode_1 ⊗ ...`.
///
/// Basis ordering is row-major over the factors: the atom index varies
/// slowest, the last mode fastest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Space {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atom: Option<AtomLevelSet>,
    modes: Vec<FockTruncation>,
}

impl Space {
    pub fn new(atom: Option<AtomLevelSet>, modes: Vec<FockTruncation>) -> Self {
        Self { atom, modes }
    }

    pub fn field(trunc: FockTruncation) -> Self {
        Self { atom: None, modes: vec![trunc] }
    }

    pub fn fields(truncs: Vec<FockTruncation>) -> Self {
        Self { atom: None, modes: truncs }
    }

    pub fn atom_field(atom: AtomLevelSet, trunc: FockTruncation) -> Self {
        Self { atom: Some(atom), modes: vec![trunc] }
    }

    pub fn atom(&self) -> Option<&AtomLevelSet> {
        self.atom.as_ref()
    }

    pub fn modes(&self) -> &[FockTruncation] {
        &self.modes
    }

    /// The same modes without the atom.
    pub fn field_part(&self) -> Space {
        Space { atom: None, modes: self.modes.clone() }
    }

    pub fn factors(&self) -> Vec<Factor> {
        let mut f = Vec::with_capacity(self.modes.len() + 1);
        if self.atom.is_some() {
            f.push(Factor::Atom);
        }
        f.extend((0..self.modes.len()).map(Factor::Mode));
        f
    }

    pub fn factor_dim(&self, factor: Factor) -> Result<usize> {
        match factor {
            Factor::Atom => self
                .atom
                .as_ref()
                .map(|a| a.len())
                .ok_or_else(|| Error::InvalidParameter("space has no atom factor".into())),
            Factor::Mode(j) => self
                .modes
                .get(j)
                .map(|t| t.dim())
                .ok_or_else(|| Error::InvalidParameter(format!("space has no mode {j}"))),
        }
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors().into_iter().map(|f| self.factor_dim(f).unwrap()).collect()
    }

    pub fn dim(&self) -> usize {
        self.factor_dims().iter().product()
    }

    /// Flat index of `(atom level, photon numbers)`.
    pub fn index(&self, level: Option<usize>, photons: &[usize]) -> usize {
        debug_assert_eq!(photons.len(), self.modes.len());
        let mut idx = match (&self.atom, level) {
            (Some(_), Some(l)) => l,
            (None, None) => 0,
            _ => panic!("atom level given for a space without atom (or missing)"),
        };
        for (t, &n) in self.modes.iter().zip(photons) {
            debug_assert!(n <= t.n_max());
            idx = idx * t.dim() + n;
        }
        idx
    }

    /// Inverse of [`Space::index`].
    pub fn decompose(&self, mut idx: usize) -> (Option<usize>, Vec<usize>) {
        let mut photons = vec![0; self.modes.len()];
        for (j, t) in self.modes.iter().enumerate().rev() {
            photons[j] = idx % t.dim();
            idx /= t.dim();
        }
        let level = self.atom.as_ref().map(|_| idx);
        (level, photons)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.dim())
            .map(|i| {
                let (level, photons) = self.decompose(i);
                let mut parts: Vec<String> = Vec::new();
                if let (Some(a), Some(l)) = (&self.atom, level) {
                    parts.push(a.labels()[l].clone());
                }
                parts.extend(photons.iter().map(|n| n.to_string()));
                parts.join(",")
            })
            .collect()
    }

    pub(crate) fn level(&self, label: &str) -> Result<usize> {
        self.atom
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("space has no atom factor".into()))?
            .index(label)
    }

    pub(crate) fn check_same(&self, other: &Space) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_and_ordering() {
        let s = Space::new(
            Some(AtomLevelSet::pod(2)),
            vec![FockTruncation::new(2).unwrap(), FockTruncation::new(3).unwrap()],
        );
        assert_eq!(s.dim(), 5 * 3 * 4);
        for i in 0..s.dim() {
            let (l, p) = s.decompose(i);
            assert_eq!(s.index(l, &p), i);
        }
        // atom slowest
        assert_eq!(s.index(Some(1), &[0, 0]), 12);
        assert_eq!(s.index(Some(0), &[0, 1]), 1);
        assert_eq!(s.labels()[13], "g1,0,1");
    }

    #[test]
    fn auto_truncation() {
        assert_eq!(FockTruncation::for_coherent(1.0).n_max(), 12);
        let t = FockTruncation::for_coherent(2.0);
        assert!(poisson_tail(4.0, t.n_max()) < TAIL_LIMIT);
        assert!(poisson_tail(4.0, t.n_max() - 1) >= TAIL_LIMIT);
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(AtomLevelSet::new(["g", "g"]).is_err());
        assert!(FockTruncation::new(0).is_err());
    }

    #[test]
    fn poisson_tail_matches_direct_sum() {
        let direct: f64 = (13..60)
            .map(|n| (-1.0f64).exp() / (1..=n).map(|k| k as f64).product::<f64>())
            .sum();
        assert!((poisson_tail(1.0, 12) - direct).abs() < 1e-20);
    }
}
