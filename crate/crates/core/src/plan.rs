//! Transport moves and ordered move plans.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayTag, SiteId};
use crate::stochastic::OccupancyState;

/// A site on one of the two arrays; serialized as `["main", 88]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteRef(pub ArrayTag, pub SiteId);

impl SiteRef {
    pub fn main(id: usize) -> Self {
        SiteRef(ArrayTag::Main, SiteId(id))
    }

    pub fn sec(id: usize) -> Self {
        SiteRef(ArrayTag::Secondary, SiteId(id))
    }

    fn as_pair(self) -> (ArrayTag, SiteId) {
        (self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    /// Secondary → main.
    Insertion,
    /// Main → main.
    Intra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMove", into = "RawMove")]
pub struct Move {
    source: SiteRef,
    dest: SiteRef,
    kind: MoveKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMove {
    src: SiteRef,
    dst: SiteRef,
    kind: MoveKind,
}

impl TryFrom<RawMove> for Move {
    type Error = Error;

    fn try_from(raw: RawMove) -> Result<Self> {
        Move::new(raw.src, raw.dst, raw.kind)
    }
}

impl From<Move> for RawMove {
    fn from(m: Move) -> Self {
        RawMove {
            src: m.source,
            dst: m.dest,
            kind: m.kind,
        }
    }
}

impl Move {
    pub fn new(source: SiteRef, dest: SiteRef, kind: MoveKind) -> Result<Self> {
        if source == dest {
            return Err(Error::InvalidMove(format!(
                "source and destination are both {:?} {}",
                source.0, source.1
            )));
        }
        let ok = match kind {
            MoveKind::Insertion => source.0 == ArrayTag::Secondary && dest.0 == ArrayTag::Main,
            MoveKind::Intra => source.0 == ArrayTag::Main && dest.0 == ArrayTag::Main,
        };
        if !ok {
            return Err(Error::InvalidMove(format!(
                "{kind:?} move cannot go from {:?} to {:?}",
                source.0, dest.0
            )));
        }
        Ok(Self { source, dest, kind })
    }

    pub fn insertion(sec: SiteId, main: SiteId) -> Self {
        Self {
            source: SiteRef(ArrayTag::Secondary, sec),
            dest: SiteRef(ArrayTag::Main, main),
            kind: MoveKind::Insertion,
        }
    }

    /// Panics if `from == to`.
    pub fn intra(from: SiteId, to: SiteId) -> Self {
        assert_ne!(from, to, "intra move must change site");
        Self {
            source: SiteRef(ArrayTag::Main, from),
            dest: SiteRef(ArrayTag::Main, to),
            kind: MoveKind::Intra,
        }
    }

    pub fn source(&self) -> SiteRef {
        self.source
    }

    pub fn dest(&self) -> SiteRef {
        self.dest
    }

    pub fn kind(&self) -> MoveKind {
        self.kind
    }

    pub(crate) fn endpoints(&self) -> ((ArrayTag, SiteId), (ArrayTag, SiteId)) {
        (self.source.as_pair(), self.dest.as_pair())
    }
}

/// Moves executed one after another by the steerable tweezer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MovePlan {
    moves: Vec<Move>,
}

impl MovePlan {
    pub fn new(moves: Vec<Move>) -> Self {
        Self { moves }
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Move> {
        self.moves.iter()
    }

    /// Checks structural legality: no site is a destination twice, no atom
    /// is sourced twice, and no site is both a source and a destination
    /// (chained moves are not allowed).
    pub fn check_structure(&self) -> Result<()> {
        let mut sources = HashSet::new();
        let mut dests = HashSet::new();
        for m in &self.moves {
            if !sources.insert(m.source) {
                return Err(Error::InvalidPlan(format!("atom at {:?} sourced twice", m.source)));
            }
            if !dests.insert(m.dest) {
                return Err(Error::InvalidPlan(format!("site {:?} is a destination twice", m.dest)));
            }
        }
        if let Some(s) = sources.intersection(&dests).next() {
            return Err(Error::InvalidPlan(format!("site {s:?} is both source and destination")));
        }
        Ok(())
    }

    /// Checks the plan against occupancies: every source occupied, every
    /// destination empty. `secondary` may be `None` for intra-only plans.
    pub fn check_against(
        &self,
        main: &OccupancyState,
        secondary: Option<&OccupancyState>,
    ) -> Result<()> {
        self.check_structure()?;
        let lookup = |r: SiteRef| -> Result<bool> {
            let state = match r.0 {
                ArrayTag::Main => main,
                ArrayTag::Secondary => secondary.ok_or_else(|| {
                    Error::InvalidPlan("plan references the secondary array".into())
                })?,
            };
            if r.1 .0 >= state.len() {
                return Err(Error::SiteOutOfRange {
                    index: r.1 .0,
                    len: state.len(),
                });
            }
            Ok(state.is_occupied(r.1))
        };
        for m in &self.moves {
            if !lookup(m.source)? {
                return Err(Error::InvalidPlan(format!("source {:?} is empty", m.source)));
            }
            if lookup(m.dest)? {
                return Err(Error::InvalidPlan(format!("destination {:?} is occupied", m.dest)));
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a MovePlan {
    type Item = &'a Move;
    type IntoIter = std::slice::Iter<'a, Move>;

    fn into_iter(self) -> Self::IntoIter {
        self.moves.iter()
    }
}
