use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atomic level. The index order is fixed for every atom dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    G = 0,
    E = 1,
    F = 2,
    H = 3,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::G, Level::E, Level::F, Level::H];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Level> {
        Level::ALL.get(index).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Level::G => 'g',
            Level::E => 'e',
            Level::F => 'f',
            Level::H => 'h',
        }
    }

    pub fn from_symbol(c: char) -> Option<Level> {
        match c.to_ascii_lowercase() {
            'g' => Some(Level::G),
            'e' => Some(Level::E),
            // the third level is also written |i> in some texts
            'f' | 'i' => Some(Level::F),
            'h' => Some(Level::H),
            _ => None,
        }
    }
}

/// Shape of the composite Hilbert space: `atom_count` atoms with `atom_dim`
/// levels each, optionally followed by one bosonic mode truncated at
/// `fock_cutoff` quanta.
///
/// Flat basis index is `(((l_1 d + l_2) d + ...) d + l_N) (n_max + 1) + n`,
/// so the mode is the fastest-varying factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Space {
    atom_count: usize,
    atom_dim: usize,
    fock_cutoff: usize,
    has_mode: bool,
}

pub fn make_space(atom_count: usize, atom_dim: usize, fock_cutoff: usize, no_mode: bool) -> Result<Space> {
    Space::new(atom_count, atom_dim, fock_cutoff, no_mode)
}

impl Space {
    pub fn new(atom_count: usize, atom_dim: usize, fock_cutoff: usize, no_mode: bool) -> Result<Self> {
        if atom_count == 0 {
            return Err(Error::InvalidSpace("at least one atom is required".into()));
        }
        if !(2..=4).contains(&atom_dim) {
            return Err(Error::InvalidSpace(format!("atom dimension {atom_dim} not in {{2, 3, 4}}")));
        }
        Ok(Space {
            atom_count,
            atom_dim,
            fock_cutoff: if no_mode { 0 } else { fock_cutoff },
            has_mode: !no_mode,
        })
    }

    /// Atoms-only space.
    pub fn atoms(atom_count: usize, atom_dim: usize) -> Result<Self> {
        Self::new(atom_count, atom_dim, 0, true)
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn atom_dim(&self) -> usize {
        self.atom_dim
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn has_mode(&self) -> bool {
        self.has_mode
    }

    pub fn mode_dim(&self) -> usize {
        if self.has_mode {
            self.fock_cutoff + 1
        } else {
            1
        }
    }

    pub fn atom_block_dim(&self) -> usize {
        self.atom_dim.pow(self.atom_count as u32)
    }

    pub fn dim(&self) -> usize {
        self.atom_block_dim() * self.mode_dim()
    }

    /// Same atoms, mode removed.
    pub fn atoms_only(&self) -> Space {
        Space { fock_cutoff: 0, has_mode: false, ..*self }
    }

    pub fn with_mode(&self, fock_cutoff: usize) -> Space {
        Space { fock_cutoff, has_mode: true, ..*self }
    }

    pub fn same_atoms(&self, other: &Space) -> bool {
        self.atom_count == other.atom_count && self.atom_dim == other.atom_dim
    }

    /// Distance in flat index between consecutive levels of atom `j`.
    pub fn atom_stride(&self, j: usize) -> usize {
        self.atom_dim.pow((self.atom_count - 1 - j) as u32) * self.mode_dim()
    }

    pub fn check_atom(&self, j: usize) -> Result<()> {
        if j >= self.atom_count {
            Err(Error::AtomIndex { index: j, count: self.atom_count })
        } else {
            Ok(())
        }
    }

    pub fn encode(&self, levels: &[usize], n: usize) -> Result<usize> {
        if levels.len() != self.atom_count {
            return Err(Error::Shape {
                expected: format!("{} levels", self.atom_count),
                found: format!("{} levels", levels.len()),
            });
        }
        if n >= self.mode_dim() {
            return Err(Error::InvalidParameter(format!("Fock index {n} beyond cutoff")));
        }
        let mut atoms = 0;
        for &l in levels {
            if l >= self.atom_dim {
                return Err(Error::InvalidParameter(format!("level {l} beyond atom dimension {}", self.atom_dim)));
            }
            atoms = atoms * self.atom_dim + l;
        }
        Ok(atoms * self.mode_dim() + n)
    }

    pub fn decode(&self, index: usize) -> (Vec<usize>, usize) {
        let n = index % self.mode_dim();
        let mut rest = index / self.mode_dim();
        let mut levels = vec![0; self.atom_count];
        for slot in levels.iter_mut().rev() {
            *slot = rest % self.atom_dim;
            rest /= self.atom_dim;
        }
        (levels, n)
    }

    /// Flat index of the product state with every atom in `level` and the mode in `|n>`.
    pub fn uniform_index(&self, level: Level, n: usize) -> Result<usize> {
        self.encode(&vec![level.index(); self.atom_count], n)
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.has_mode {
            write!(f, "{} atoms x {} levels x Fock(0..={})", self.atom_count, self.atom_dim, self.fock_cutoff)
        } else {
            write!(f, "{} atoms x {} levels", self.atom_count, self.atom_dim)
        }
    }
}

/// Product-basis label such as `ggee` or `ggee;3` (atoms, then Fock number).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisLabel {
    pub levels: Vec<Level>,
    pub n: usize,
}

impl BasisLabel {
    pub fn uniform(level: Level, atom_count: usize) -> Self {
        BasisLabel { levels: vec![level; atom_count], n: 0 }
    }

    pub fn index_in(&self, space: &Space) -> Result<usize> {
        let levels: Vec<usize> = self.levels.iter().map(|l| l.index()).collect();
        space.encode(&levels, self.n).map_err(|_| Error::Label(self.to_string()))
    }
}

impl FromStr for BasisLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (atoms, n) = match s.split_once(';') {
            Some((a, n)) => (a, n.trim().parse().map_err(|_| Error::Label(s.into()))?),
            None => (s, 0),
        };
        let levels = atoms
            .trim()
            .chars()
            .map(|c| Level::from_symbol(c).ok_or_else(|| Error::Label(s.into())))
            .collect::<Result<Vec<_>>>()?;
        if levels.is_empty() {
            return Err(Error::Label(s.into()));
        }
        Ok(BasisLabel { levels, n })
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.levels {
            write!(f, "{}", l.symbol())?;
        }
        if self.n != 0 {
            write!(f, ";{}", self.n)?;
        }
        Ok(())
    }
}
