//! Behavioral full-adder cells and the interleaved adder tree.
//!
//! Cells are pure truth tables tagged with a transistor count and a
//! degradation flag (pass-transistor cells may not be chained back to
//! back on a carry path). The tree composes them into a balanced binary
//! reduction of ripple-carry adders and characterizes the resulting
//! arithmetic exactly.

mod tree;

pub use tree::{
    build_tree, CellCost, CellCosts, ErrorReport, FabricCost, PatternApply, SampleMode,
    TreeAnchors, TreeInstance, TreeSpec, EXHAUSTIVE_BIT_LIMIT,
};
pub(crate) use tree::substream;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the built-in 28-transistor exact full adder.
pub const KIND_EXACT_28T: &str = "exact28t";
/// Name of the built-in 10-transistor exact full adder (pass-transistor,
/// degrading output levels).
pub const KIND_EXACT_10T: &str = "exact10t";
/// Name of the built-in lower-part OR cell: sum = a OR b, carry out 0.
pub const KIND_LOA_OR: &str = "loa_or";

/// One full-adder behavioral model: an 8-entry truth table over
/// (a, b, cin) plus bookkeeping for placement and cost accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdderCellKind {
    pub name: String,
    /// (sum, cout) indexed by a | b<<1 | cin<<2.
    pub truth_table: [(bool, bool); 8],
    pub transistor_count: u32,
    /// Pass-transistor cells degrade output levels; placement limits how
    /// many may be chained consecutively on a carry path.
    pub degrading: bool,
}

/// The exact full-adder function: sum = a^b^cin, cout = majority(a,b,cin).
pub fn exact_truth_table() -> [(bool, bool); 8] {
    let mut table = [(false, false); 8];
    for (idx, entry) in table.iter_mut().enumerate() {
        let a = idx & 1 != 0;
        let b = idx & 2 != 0;
        let cin = idx & 4 != 0;
        let sum = a ^ b ^ cin;
        let cout = (a && b) || (a && cin) || (b && cin);
        *entry = (sum, cout);
    }
    table
}

impl AdderCellKind {
    pub fn new(
        name: impl Into<String>,
        truth_table: [(bool, bool); 8],
        transistor_count: u32,
        degrading: bool,
    ) -> Self {
        AdderCellKind {
            name: name.into(),
            truth_table,
            transistor_count,
            degrading,
        }
    }

    /// The conventional 28T CMOS full adder.
    pub fn exact_28t() -> Self {
        Self::new(KIND_EXACT_28T, exact_truth_table(), 28, false)
    }

    /// The compact 10T pass-transistor full adder. Logically exact;
    /// differs from the 28T cell only in cost and the degradation flag.
    pub fn exact_10t() -> Self {
        Self::new(KIND_EXACT_10T, exact_truth_table(), 10, true)
    }

    /// Lower-part OR adder cell: sum = a OR b, cout = 0, cin ignored.
    pub fn loa_or() -> Self {
        let mut table = [(false, false); 8];
        for (idx, entry) in table.iter_mut().enumerate() {
            let a = idx & 1 != 0;
            let b = idx & 2 != 0;
            *entry = (a || b, false);
        }
        Self::new(KIND_LOA_OR, table, 6, false)
    }

    /// True iff the truth table equals the exact full-adder function.
    pub fn is_exact(&self) -> bool {
        self.truth_table == exact_truth_table()
    }

    /// Pure table lookup.
    pub fn eval(&self, a: bool, b: bool, cin: bool) -> (bool, bool) {
        self.truth_table[(a as usize) | ((b as usize) << 1) | ((cin as usize) << 2)]
    }
}

/// Registry of cell kinds referenced by name from tree specs.
#[derive(Debug, Clone)]
pub struct KindSet {
    kinds: Vec<AdderCellKind>,
}

impl Default for KindSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl KindSet {
    /// The three built-in kinds. Third-party approximate cells are loaded
    /// from fixtures, never hardcoded.
    pub fn builtin() -> Self {
        KindSet {
            kinds: vec![
                AdderCellKind::exact_28t(),
                AdderCellKind::exact_10t(),
                AdderCellKind::loa_or(),
            ],
        }
    }

    pub fn kinds(&self) -> &[AdderCellKind] {
        &self.kinds
    }

    pub fn get(&self, name: &str) -> Option<&AdderCellKind> {
        self.kinds.iter().find(|k| k.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.kinds.iter().position(|k| k.name == name)
    }

    /// Adds or replaces a kind definition.
    pub fn insert(&mut self, kind: AdderCellKind) {
        if let Some(existing) = self.kinds.iter_mut().find(|k| k.name == kind.name) {
            *existing = kind;
        } else {
            self.kinds.push(kind);
        }
    }

    /// Extends the registry from a fixtures file (see `fixture::CellFixture`).
    pub fn extend_from_fixtures(&mut self, fixtures: Vec<AdderCellKind>) {
        for kind in fixtures {
            self.insert(kind);
        }
    }
}

/// Serialized form of a cell definition in a fixtures file. The truth
/// table maps "abc" bit-string keys (a, b, cin) to [sum, cout]; a missing
/// table means the exact full-adder function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFixture {
    pub name: String,
    pub transistors: u32,
    #[serde(default)]
    pub degrading: bool,
    #[serde(default)]
    pub truth_table: Option<std::collections::BTreeMap<String, [u8; 2]>>,
}

impl CellFixture {
    pub fn into_kind(self) -> Result<AdderCellKind> {
        let table = match self.truth_table {
            None => exact_truth_table(),
            Some(map) => {
                let mut table = [(false, false); 8];
                let mut seen = [false; 8];
                for (key, value) in &map {
                    let bits: Vec<char> = key.chars().collect();
                    if bits.len() != 3 || bits.iter().any(|c| *c != '0' && *c != '1') {
                        return Err(Error::InvalidConfig(format!(
                            "cell '{}': truth table key '{}' is not a 3-bit string",
                            self.name, key
                        )));
                    }
                    let a = bits[0] == '1';
                    let b = bits[1] == '1';
                    let cin = bits[2] == '1';
                    let idx = (a as usize) | ((b as usize) << 1) | ((cin as usize) << 2);
                    table[idx] = (value[0] != 0, value[1] != 0);
                    seen[idx] = true;
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::InvalidConfig(format!(
                        "cell '{}': truth table is not total over the 8 input combinations",
                        self.name
                    )));
                }
                table
            }
        };
        Ok(AdderCellKind::new(self.name, table, self.transistors, self.degrading))
    }
}
