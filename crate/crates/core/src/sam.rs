//! Sparse associative output layer.
//!
//! `Omega` has one row per class and one column per SOM neuron (`k * N`
//! columns). Learning a `(code, label)` pair touches the `k` cells of row
//! `label` addressed by the code: Binary mode takes the max (sets the bit),
//! Integer mode adds one. Scoring a code reads the same `k` cells of every
//! row, which equals the dense product `Omega . Q(x)`; prediction is the
//! Winner-Takes-All over those scores.
//!
//! Both learning rules are commutative, so a classifier grown one class at a
//! time, or trained in shards and combined with
//! [`AssociativeClassifier::merge`], is bit-identical to one trained on
//! everything at once.

use crate::error::{Error, Result};
use crate::pq::SparseCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `k x N-AL`: cells in {0, 1}, max rule.
    Binary,
    /// `k x N-IAL`: 32-bit counters, sum rule.
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Cells {
    /// Row-major, `words_per_row` 64-bit words per class, LSB-first.
    Bits(Vec<u64>),
    /// Row-major, `k * N` counters per class.
    Counts(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociativeClassifier {
    k: usize,
    n_per_som: usize,
    cells: Cells,
    samples_per_class: Vec<u64>,
}

impl AssociativeClassifier {
    pub fn new(mode: Mode, k: usize, n_per_som: usize) -> Result<Self> {
        if k == 0 || n_per_som == 0 {
            return Err(Error::Contract(format!(
                "classifier needs k >= 1 and N >= 1, got k = {k}, N = {n_per_som}"
            )));
        }
        let cells = match mode {
            Mode::Binary => Cells::Bits(Vec::new()),
            Mode::Integer => Cells::Counts(Vec::new()),
        };
        Ok(AssociativeClassifier {
            k,
            n_per_som,
            cells,
            samples_per_class: Vec::new(),
        })
    }

    /// Rebuilds a binary classifier from packed rows, checking the per-block
    /// popcount bounds.
    pub fn from_bits(
        k: usize,
        n_per_som: usize,
        words: Vec<u64>,
        samples_per_class: Vec<u64>,
    ) -> Result<Self> {
        let mut clf = AssociativeClassifier::new(Mode::Binary, k, n_per_som)?;
        let wpr = clf.words_per_row();
        if words.len() != wpr * samples_per_class.len() {
            return Err(Error::Shape(format!(
                "{} words for {} classes of {wpr} words",
                words.len(),
                samples_per_class.len()
            )));
        }
        let cols = clf.columns();
        if cols % 64 != 0 {
            let tail = !0u64 << (cols % 64);
            if words.chunks_exact(wpr).any(|row| row[wpr - 1] & tail != 0) {
                return Err(Error::Shape("bits set past the last column".into()));
            }
        }
        clf.cells = Cells::Bits(words);
        clf.samples_per_class = samples_per_class;
        for class in 0..clf.num_classes() {
            let spc = clf.samples_per_class[class];
            for j in 0..k {
                let ones = (0..n_per_som)
                    .filter(|i| clf.cell(class, j * n_per_som + i) == 1)
                    .count() as u64;
                if ones > spc.min(n_per_som as u64) || (spc > 0 && ones == 0) {
                    return Err(Error::Shape(format!(
                        "class {class} block {j}: {ones} ones for {spc} samples"
                    )));
                }
            }
        }
        Ok(clf)
    }

    /// Rebuilds an integer classifier from row-major counters, checking that
    /// every block of a row sums to that class's sample count.
    pub fn from_counts(
        k: usize,
        n_per_som: usize,
        counts: Vec<u32>,
        samples_per_class: Vec<u64>,
    ) -> Result<Self> {
        let mut clf = AssociativeClassifier::new(Mode::Integer, k, n_per_som)?;
        let cols = clf.columns();
        if counts.len() != cols * samples_per_class.len() {
            return Err(Error::Shape(format!(
                "{} counters for {} classes of {cols} columns",
                counts.len(),
                samples_per_class.len()
            )));
        }
        for (class, row) in counts.chunks_exact(cols).enumerate() {
            for (j, block) in row.chunks_exact(n_per_som).enumerate() {
                let sum: u64 = block.iter().map(|&c| c as u64).sum();
                if sum != samples_per_class[class] {
                    return Err(Error::Shape(format!(
                        "class {class} block {j} sums to {sum}, expected {}",
                        samples_per_class[class]
                    )));
                }
            }
        }
        clf.cells = Cells::Counts(counts);
        clf.samples_per_class = samples_per_class;
        Ok(clf)
    }

    pub fn mode(&self) -> Mode {
        match self.cells {
            Cells::Bits(_) => Mode::Binary,
            Cells::Counts(_) => Mode::Integer,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_per_som(&self) -> usize {
        self.n_per_som
    }

    pub fn columns(&self) -> usize {
        self.k * self.n_per_som
    }

    pub fn words_per_row(&self) -> usize {
        self.columns().div_ceil(64)
    }

    pub fn num_classes(&self) -> usize {
        self.samples_per_class.len()
    }

    pub fn samples_per_class(&self) -> &[u64] {
        &self.samples_per_class
    }

    /// Packed rows in Binary mode.
    pub fn bits(&self) -> Option<&[u64]> {
        match &self.cells {
            Cells::Bits(w) => Some(w),
            Cells::Counts(_) => None,
        }
    }

    /// Counter rows in Integer mode.
    pub fn counts(&self) -> Option<&[u32]> {
        match &self.cells {
            Cells::Counts(c) => Some(c),
            Cells::Bits(_) => None,
        }
    }

    /// Value of `Omega[class][column]`; zero past the last class.
    pub fn cell(&self, class: usize, column: usize) -> u32 {
        if class >= self.num_classes() {
            return 0;
        }
        match &self.cells {
            Cells::Bits(w) => {
                let word = w[class * self.words_per_row() + column / 64];
                ((word >> (column % 64)) & 1) as u32
            }
            Cells::Counts(c) => c[class * self.columns() + column],
        }
    }

    fn check_code(&self, code: &SparseCode) -> Result<()> {
        if code.k() != self.k || code.n_per_som() != self.n_per_som {
            return Err(Error::Shape(format!(
                "code is {}x{}, classifier is {}x{}",
                code.k(),
                code.n_per_som(),
                self.k,
                self.n_per_som
            )));
        }
        Ok(())
    }

    fn grow_to(&mut self, classes: usize) {
        if classes <= self.num_classes() {
            return;
        }
        match &mut self.cells {
            Cells::Bits(w) => w.resize(classes * (self.k * self.n_per_som).div_ceil(64), 0),
            Cells::Counts(c) => c.resize(classes * self.k * self.n_per_som, 0),
        }
        self.samples_per_class.resize(classes, 0);
    }

    fn shrink_to(&mut self, classes: usize) {
        let (wpr, cols) = (self.words_per_row(), self.columns());
        match &mut self.cells {
            Cells::Bits(w) => w.truncate(classes * wpr),
            Cells::Counts(c) => c.truncate(classes * cols),
        }
        self.samples_per_class.truncate(classes);
    }

    /// Stores one pattern in row `label`, creating the row (and any gap rows)
    /// on first use.
    pub fn learn(&mut self, code: &SparseCode, label: usize) -> Result<()> {
        self.check_code(code)?;
        let before = self.num_classes();
        if let Err(e) = self.apply(code, label) {
            self.shrink_to(before);
            return Err(e);
        }
        Ok(())
    }

    fn apply(&mut self, code: &SparseCode, label: usize) -> Result<()> {
        self.grow_to(label + 1);
        let (wpr, cols) = (self.words_per_row(), self.columns());
        match &mut self.cells {
            Cells::Bits(w) => {
                let row = &mut w[label * wpr..(label + 1) * wpr];
                for c in code.columns() {
                    row[c / 64] |= 1 << (c % 64);
                }
            }
            Cells::Counts(counts) => {
                let row = &mut counts[label * cols..(label + 1) * cols];
                if let Some(column) = code.columns().find(|&c| row[c] == u32::MAX) {
                    return Err(Error::Overflow {
                        class: label,
                        column,
                    });
                }
                for c in code.columns() {
                    row[c] += 1;
                }
            }
        }
        self.samples_per_class[label] += 1;
        Ok(())
    }

    /// Undoes a successful `apply` in Integer mode.
    fn unapply(&mut self, code: &SparseCode, label: usize) {
        let cols = self.columns();
        if let Cells::Counts(counts) = &mut self.cells {
            let row = &mut counts[label * cols..(label + 1) * cols];
            for c in code.columns() {
                row[c] -= 1;
            }
            self.samples_per_class[label] -= 1;
        }
    }

    /// Learns every pair, or none of them.
    pub fn learn_batch(&mut self, pairs: &[(SparseCode, usize)]) -> Result<()> {
        for (index, (code, _)) in pairs.iter().enumerate() {
            self.check_code(code).map_err(|e| Error::Pair {
                index,
                source: Box::new(e),
            })?;
        }
        let before = self.num_classes();
        for (index, (code, label)) in pairs.iter().enumerate() {
            if let Err(e) = self.apply(code, *label) {
                // only the counter rule can fail; binary bits never need undoing
                for (code, label) in pairs[..index].iter().rev() {
                    self.unapply(code, *label);
                }
                self.shrink_to(before);
                return Err(Error::Pair {
                    index,
                    source: Box::new(e),
                });
            }
        }
        Ok(())
    }

    /// Cellwise max (Binary) or sum (Integer) of two classifiers of the same
    /// shape; the shorter one is padded with empty rows.
    pub fn merge(&self, other: &AssociativeClassifier) -> Result<AssociativeClassifier> {
        if self.mode() != other.mode() || self.k != other.k || self.n_per_som != other.n_per_som {
            return Err(Error::Shape(format!(
                "cannot merge {:?} {}x{} with {:?} {}x{}",
                self.mode(),
                self.k,
                self.n_per_som,
                other.mode(),
                other.k,
                other.n_per_som
            )));
        }
        let mut out = self.clone();
        out.grow_to(other.num_classes());
        match (&mut out.cells, &other.cells) {
            (Cells::Bits(a), Cells::Bits(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x |= y;
                }
            }
            (Cells::Counts(a), Cells::Counts(b)) => {
                let cols = self.columns();
                for (i, (x, y)) in a.iter_mut().zip(b).enumerate() {
                    *x = x.checked_add(*y).ok_or(Error::Overflow {
                        class: i / cols,
                        column: i % cols,
                    })?;
                }
            }
            _ => unreachable!("modes checked above"),
        }
        for (s, o) in out
            .samples_per_class
            .iter_mut()
            .zip(&other.samples_per_class)
        {
            *s += o;
        }
        Ok(out)
    }

    /// `Omega . Q(x)`: per class, the sum of the `k` cells the code addresses.
    pub fn scores(&self, code: &SparseCode) -> Result<Vec<u64>> {
        self.check_code(code)?;
        if self.num_classes() == 0 {
            return Err(Error::EmptyClassifier);
        }
        let cols: Vec<usize> = code.columns().collect();
        Ok(match &self.cells {
            Cells::Bits(w) => {
                let probes: Vec<(usize, u64)> =
                    cols.iter().map(|&c| (c / 64, 1u64 << (c % 64))).collect();
                w.chunks_exact(self.words_per_row())
                    .map(|row| {
                        probes
                            .iter()
                            .filter(|&&(word, mask)| row[word] & mask != 0)
                            .count() as u64
                    })
                    .collect()
            }
            Cells::Counts(c) => c
                .chunks_exact(self.columns())
                .map(|row| cols.iter().map(|&col| row[col] as u64).sum())
                .collect(),
        })
    }

    /// Winner-Takes-All over [`scores`](Self::scores); lowest class id on ties.
    pub fn predict(&self, code: &SparseCode) -> Result<usize> {
        let scores = self.scores(code)?;
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// The `count` best classes by descending score, then ascending id.
    pub fn top_k(&self, code: &SparseCode, count: usize) -> Result<Vec<(usize, u64)>> {
        let scores = self.scores(code)?;
        if count == 0 || count > scores.len() {
            return Err(Error::Contract(format!(
                "top-k with K = {count} over {} classes",
                scores.len()
            )));
        }
        let mut ranked: Vec<(usize, u64)> = scores.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(count);
        Ok(ranked)
    }
}
