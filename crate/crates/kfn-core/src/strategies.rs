//! Node-selection strategies: given a requester, a unit field and the energy
//! matrix, pick the responder a query is sent to.

use crate::model::{EnergyMatrix, NodeId, UnitFieldId};
use rand::Rng;
use thiserror::Error;

/// The five selection rules. `FromStr`/`name` use the stable lowercase names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Random,
    Greedy,
    Generous,
    Selfish,
    Conscious,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::Greedy,
        Strategy::Generous,
        Strategy::Selfish,
        Strategy::Conscious,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Greedy => "greedy",
            Strategy::Generous => "generous",
            Strategy::Selfish => "selfish",
            Strategy::Conscious => "conscious",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown strategy {0:?}; expected one of random, greedy, generous, selfish, conscious")]
pub struct UnknownStrategy(pub String);

impl std::str::FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Strategy::Random),
            "greedy" => Ok(Strategy::Greedy),
            "generous" => Ok(Strategy::Generous),
            "selfish" => Ok(Strategy::Selfish),
            "conscious" => Ok(Strategy::Conscious),
            other => Err(UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("no candidate to select from")]
    NoCandidates,
    #[error("no candidate is available")]
    NoAvailableNode,
}

/// Inputs shared by every strategy. `availability` is indexed by node id and
/// must cover every candidate; only Conscious reads it.
pub struct SelectionContext<'a> {
    pub requester: NodeId,
    pub unit_field: UnitFieldId,
    pub energies: &'a EnergyMatrix,
    pub candidates: &'a [NodeId],
    pub availability: &'a [bool],
}

impl SelectionContext<'_> {
    fn energy_of(&self, node: NodeId) -> f64 {
        self.energies
            .energy(node, self.unit_field)
            .expect("candidate within energy matrix")
    }
}

pub fn select<R: Rng + ?Sized>(
    strategy: Strategy,
    ctx: &SelectionContext<'_>,
    rng: &mut R,
) -> Result<NodeId, SelectionError> {
    match strategy {
        Strategy::Random => select_random(ctx, rng),
        Strategy::Greedy => select_greedy(ctx),
        Strategy::Generous => select_generous(ctx),
        Strategy::Selfish => select_selfish(ctx, rng),
        Strategy::Conscious => select_conscious(ctx),
    }
}

/// Uniform choice among all candidates.
pub fn select_random<R: Rng + ?Sized>(
    ctx: &SelectionContext<'_>,
    rng: &mut R,
) -> Result<NodeId, SelectionError> {
    if ctx.candidates.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    Ok(ctx.candidates[rng.random_range(0..ctx.candidates.len())])
}

/// Highest energy in the queried unit field; ties go to the lowest node id.
pub fn select_greedy(ctx: &SelectionContext<'_>) -> Result<NodeId, SelectionError> {
    argmax_by(ctx, |e, best| e > best).ok_or(SelectionError::NoCandidates)
}

/// Lowest energy in the queried unit field; ties go to the lowest node id.
pub fn select_generous(ctx: &SelectionContext<'_>) -> Result<NodeId, SelectionError> {
    argmax_by(ctx, |e, best| e < best).ok_or(SelectionError::NoCandidates)
}

/// Uniform choice among candidates with strictly higher energy than the
/// requester; when none exists, among candidates at exactly the requester's
/// energy. No candidate at or above the requester's level is an error.
pub fn select_selfish<R: Rng + ?Sized>(
    ctx: &SelectionContext<'_>,
    rng: &mut R,
) -> Result<NodeId, SelectionError> {
    if ctx.candidates.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    let own = ctx.energy_of(ctx.requester);
    let higher: Vec<NodeId> = ctx
        .candidates
        .iter()
        .copied()
        .filter(|&c| ctx.energy_of(c) > own)
        .collect();
    let pool = if higher.is_empty() {
        ctx.candidates
            .iter()
            .copied()
            .filter(|&c| ctx.energy_of(c) == own)
            .collect()
    } else {
        higher
    };
    if pool.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    Ok(pool[rng.random_range(0..pool.len())])
}

/// Highest energy among currently available candidates; ties go to the lowest
/// node id. All candidates busy is an error distinct from having none.
pub fn select_conscious(ctx: &SelectionContext<'_>) -> Result<NodeId, SelectionError> {
    if ctx.candidates.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    let mut best: Option<(f64, NodeId)> = None;
    for &c in ctx.candidates {
        if !ctx.availability[c.index()] {
            continue;
        }
        let e = ctx.energy_of(c);
        let better = match best {
            None => true,
            Some((be, bid)) => e > be || (e == be && c < bid),
        };
        if better {
            best = Some((e, c));
        }
    }
    best.map(|(_, id)| id).ok_or(SelectionError::NoAvailableNode)
}

fn argmax_by(
    ctx: &SelectionContext<'_>,
    wins: impl Fn(f64, f64) -> bool,
) -> Option<NodeId> {
    let mut best: Option<(f64, NodeId)> = None;
    for &c in ctx.candidates {
        let e = ctx.energy_of(c);
        let better = match best {
            None => true,
            Some((be, bid)) => wins(e, be) || (e == be && c < bid),
        };
        if better {
            best = Some((e, c));
        }
    }
    best.map(|(_, id)| id)
}
