//! Hard majority voting over trained classifiers.
//!
//! Two ensemble shapes are built from a grid of per-(family, embedding)
//! pipelines: one family across several embeddings (e.g. `SVM_w2v`,
//! `SVM_FT`, `SVM_GloVe`), and one embedding across several families
//! (`ML_word2vec`).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Pipeline;
use crate::corpus::Label;
use crate::error::{Error, Result};

/// Anything that can cast a vote on an item of type `I`.
pub trait Voter<I: ?Sized>: Send + Sync {
    fn name(&self) -> &str;
    fn vote(&self, item: &I) -> Result<Label>;
}

impl<S: AsRef<str> + Sync> Voter<[S]> for Pipeline {
    fn name(&self) -> &str {
        &self.name
    }

    fn vote(&self, tokens: &[S]) -> Result<Label> {
        Ok(self.predict_tokens(tokens)?.label)
    }
}

impl<I: ?Sized, V: Voter<I> + ?Sized> Voter<I> for Arc<V> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn vote(&self, item: &I) -> Result<Label> {
        (**self).vote(item)
    }
}

/// A voter backed by a closure, mainly for tests and adapters.
pub struct FnVoter<F> {
    pub name: String,
    pub f: F,
}

impl<I: ?Sized, F> Voter<I> for FnVoter<F>
where
    F: Fn(&I) -> Result<Label> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn vote(&self, item: &I) -> Result<Label> {
        (self.f)(item)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    PreferViolation,
}

/// Majority label of `votes`; an exact tie goes to `rule`.
pub fn tally(votes: &[Label], rule: TieRule) -> Label {
    let v = votes.iter().filter(|l| l.is_violation()).count();
    let n = votes.len() - v;
    match v.cmp(&n) {
        std::cmp::Ordering::Greater => Label::Violation,
        std::cmp::Ordering::Less => Label::NonViolation,
        std::cmp::Ordering::Equal => match rule {
            TieRule::PreferViolation => Label::Violation,
        },
    }
}

pub struct VotingEnsemble<V> {
    name: String,
    voters: Vec<V>,
    tie_rule: TieRule,
}

impl<V> VotingEnsemble<V> {
    pub fn new(name: impl Into<String>, voters: Vec<V>, tie_rule: TieRule) -> Result<Self> {
        if voters.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "an ensemble needs at least 2 voters, got {}",
                voters.len()
            )));
        }
        Ok(VotingEnsemble {
            name: name.into(),
            voters,
            tie_rule,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn voters(&self) -> &[V] {
        &self.voters
    }

    pub fn tie_rule(&self) -> TieRule {
        self.tie_rule
    }
}

impl<V> VotingEnsemble<V> {
    /// One majority label per item. Items are voted in parallel; the
    /// output order matches `items`.
    pub fn hard_vote<I>(&self, items: &[I]) -> Result<Vec<Label>>
    where
        I: Sync,
        V: Voter<I>,
    {
        items
            .par_iter()
            .enumerate()
            .map(|(idx, item)| self.vote_one(item).map_err(|e| e.context(format!("item {idx}"))))
            .collect()
    }

    /// Like [`hard_vote`](Self::hard_vote) for unsized items such as token slices.
    pub fn hard_vote_refs<I>(&self, items: &[&I]) -> Result<Vec<Label>>
    where
        I: ?Sized + Sync,
        V: Voter<I>,
    {
        items
            .par_iter()
            .enumerate()
            .map(|(idx, item)| self.vote_one(*item).map_err(|e| e.context(format!("item {idx}"))))
            .collect()
    }

    pub fn vote_one<I>(&self, item: &I) -> Result<Label>
    where
        I: ?Sized,
        V: Voter<I>,
    {
        let votes = self
            .voters
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.vote(item)
                    .map_err(|e| e.context(format!("voter {i} ({})", v.name())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(tally(&votes, self.tie_rule))
    }
}

/// Trained pipelines indexed by (family, embedding).
#[derive(Debug, Clone, Default)]
pub struct ModelGrid {
    entries: Vec<(String, String, Arc<Pipeline>)>,
}

impl ModelGrid {
    pub fn insert(&mut self, family: &str, embedding: &str, pipeline: Arc<Pipeline>) {
        self.entries.retain(|(f, e, _)| !(f == family && e == embedding));
        self.entries.push((family.to_string(), embedding.to_string(), pipeline));
    }

    pub fn get(&self, family: &str, embedding: &str) -> Result<Arc<Pipeline>> {
        self.entries
            .iter()
            .find(|(f, e, _)| f == family && e == embedding)
            .map(|(_, _, p)| p.clone())
            .ok_or_else(|| Error::MissingCell(format!("no {family} model for embedding {embedding}")))
    }
}

/// One family voting across `embeddings`, in the order given.
pub fn build_family_ensemble<S: AsRef<str>>(
    grid: &ModelGrid,
    family: &str,
    embeddings: &[S],
) -> Result<VotingEnsemble<Arc<Pipeline>>> {
    let voters = embeddings
        .iter()
        .map(|e| grid.get(family, e.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    VotingEnsemble::new(family, voters, TieRule::PreferViolation)
}

/// Several families voting on one embedding, in the order given.
pub fn build_embedding_ensemble<S: AsRef<str>>(
    grid: &ModelGrid,
    embedding: &str,
    families: &[S],
) -> Result<VotingEnsemble<Arc<Pipeline>>> {
    let voters = families
        .iter()
        .map(|f| grid.get(f.as_ref(), embedding))
        .collect::<Result<Vec<_>>>()?;
    VotingEnsemble::new(format!("ML_{embedding}"), voters, TieRule::PreferViolation)
}
