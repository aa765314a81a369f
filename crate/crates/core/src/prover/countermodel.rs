//! Finite countermodel search over small carriers with distances from a grid.

use std::collections::BTreeSet;

use crate::algebra::{for_each_tuple, Assignment, AxiomCheck, CSequent, Eval, Frame, Model, Verdict3};
use crate::extreal::ExtReal;
use crate::metric::FinMetric;
use crate::syntax::{Context, Preterm, Sequent};
use crate::theories::Theory;

use super::ProverConfig;

/// A model of the theory together with the assignment that witnesses the failure.
#[derive(Clone, Debug)]
pub struct Countermodel {
    pub model: Model,
    pub assignment: Assignment,
}

#[derive(Clone, Debug)]
pub enum SearchResult {
    Found(Box<Countermodel>),
    /// `truncated` when the node budget ran out before the space was exhausted.
    NoneFound {
        truncated: bool,
    },
}

impl SearchResult {
    pub fn found(&self) -> Option<&Countermodel> {
        match self {
            SearchResult::Found(c) => Some(c),
            SearchResult::NoneFound { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Goal {
    /// The sequent fails; an undefined side counts as failure.
    Violate,
    /// Both sides are defined and further apart than the bound (or at least as far, when not strict).
    Exceed { bound: ExtReal, strict: bool },
}

/// Metrics on `1..=size` points with distances from `grid`, one per isomorphism class.
pub fn carriers(size: usize, grid: &[ExtReal]) -> Vec<FinMetric> {
    let values: Vec<ExtReal> =
        grid.iter().copied().filter(|v| !v.is_zero()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut out = Vec::new();
    for n in 1..=size {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let perms = permutations(n);
        let mut seen = BTreeSet::new();
        for_each_tuple(values.len(), pairs.len(), |choice| {
            let mut d = vec![vec![ExtReal::ZERO; n]; n];
            for (&(i, j), &c) in pairs.iter().zip(choice) {
                d[i][j] = values[c];
                d[j][i] = values[c];
            }
            let triangle = (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| d[i][j] <= d[i][k] + d[k][j])));
            if !triangle {
                return true;
            }
            let canon = perms
                .iter()
                .map(|p| pairs.iter().map(|&(i, j)| d[p[i]][p[j]]).collect::<Vec<_>>())
                .min()
                .expect("at least one permutation");
            if seen.insert(canon) {
                let points = (0..n).map(|i| i.to_string()).collect();
                out.push(FinMetric::new(points, d).expect("checked metric"));
            }
            true
        });
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// A model of `theory` and an assignment satisfying `ctx` with `d(s, t) > eps`.
pub fn countermodel_search(
    theory: &Theory,
    ctx: &Context,
    s: &Preterm,
    t: &Preterm,
    eps: ExtReal,
    cfg: &ProverConfig,
) -> SearchResult {
    let seq = Sequent::eq(ctx.clone(), s.clone(), t.clone(), eps);
    search(theory, &seq, Goal::Exceed { bound: eps, strict: true }, &cfg.grid, cfg)
}

/// A model in which `d(s, t) ≥ bound`: no bound below `bound` is derivable.
///
/// `bound` is added to the grid so that the distance itself is available.
pub fn separating_model(
    theory: &Theory,
    ctx: &Context,
    s: &Preterm,
    t: &Preterm,
    bound: ExtReal,
    cfg: &ProverConfig,
) -> SearchResult {
    let seq = Sequent::eq(ctx.clone(), s.clone(), t.clone(), bound);
    let mut grid = cfg.grid.clone();
    grid.push(bound);
    search(theory, &seq, Goal::Exceed { bound, strict: false }, &grid, cfg)
}

/// A model of `theory` that does not satisfy `seq`.
pub fn find_violation(theory: &Theory, seq: &Sequent, cfg: &ProverConfig) -> SearchResult {
    search(theory, seq, Goal::Violate, &cfg.grid, cfg)
}

fn search(theory: &Theory, seq: &Sequent, goal: Goal, grid: &[ExtReal], cfg: &ProverConfig) -> SearchResult {
    let mut budget = cfg.budget;
    let mut truncated = false;
    for carrier in carriers(cfg.size, grid) {
        if let Goal::Exceed { bound, strict } = goal {
            let reachable =
                (0..carrier.len()).any(|i| (0..carrier.len()).any(|j| beyond(carrier.d(i, j), bound, strict)));
            if !reachable {
                continue;
            }
        }
        let frame = Frame::new(&theory.signature, &carrier);
        let Ok(cs) = CSequent::compile(&frame, seq) else { continue };
        let Some(checks) = theory.axioms.iter().map(|a| AxiomCheck::compile(&frame, a)).collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let mut vars = seq.vars();
        // `CSequent::compile` numbers variables in the same order as `Sequent::vars`.
        vars.truncate(cs.nvars);
        let mut found = None;
        for_each_tuple(carrier.len(), cs.nvars, |alpha| {
            if !cs.admits(&carrier, alpha) {
                return true;
            }
            let mut s = Search {
                frame: &frame,
                cs: &cs,
                checks: &checks,
                goal,
                alpha,
                budget: &mut budget,
                out_of_budget: false,
            };
            let mut tables: Vec<Vec<Option<usize>>> = frame.spaces.iter().map(|sp| vec![None; sp.len()]).collect();
            if s.dfs(&mut tables) {
                let full = tables.into_iter().map(|t| t.into_iter().map(|v| v.expect("complete")).collect()).collect();
                let assignment = vars.iter().cloned().zip(alpha.iter().copied()).collect();
                found =
                    Some(Countermodel { model: Model::from_parts(&theory.signature, frame.clone(), full), assignment });
                return false;
            }
            if s.out_of_budget {
                truncated = true;
                return false;
            }
            true
        });
        if let Some(c) = found {
            return SearchResult::Found(Box::new(c));
        }
        if truncated {
            break;
        }
    }
    SearchResult::NoneFound { truncated }
}

fn beyond(d: ExtReal, bound: ExtReal, strict: bool) -> bool {
    if strict {
        d > bound
    } else {
        d >= bound
    }
}

struct Search<'a> {
    frame: &'a Frame,
    cs: &'a CSequent,
    checks: &'a [AxiomCheck],
    goal: Goal,
    alpha: &'a [usize],
    budget: &'a mut usize,
    out_of_budget: bool,
}

enum Status {
    Dead,
    Need(usize, usize),
    Done,
}

impl Search<'_> {
    fn goal(&self, tables: &Vec<Vec<Option<usize>>>) -> Status {
        let f = self.frame;
        let l = match f.eval(tables, &self.cs.lhs, self.alpha) {
            Eval::Val(v) => Some(v),
            Eval::Need(o, c) => return Status::Need(o, c),
            Eval::Undef(_) => None,
        };
        let r = match &self.cs.rhs {
            None => return if l.is_none() { Status::Done } else { Status::Dead },
            Some((t, _)) => match f.eval(tables, t, self.alpha) {
                Eval::Val(v) => Some(v),
                Eval::Need(o, c) => return Status::Need(o, c),
                Eval::Undef(_) => None,
            },
        };
        let hit = match (self.goal, l, r) {
            (Goal::Violate, Some(a), Some(b)) => f.carrier.d(a, b) > self.cs.rhs.as_ref().expect("equation").1,
            (Goal::Violate, _, _) => true,
            (Goal::Exceed { bound, strict }, Some(a), Some(b)) => beyond(f.carrier.d(a, b), bound, strict),
            (Goal::Exceed { .. }, _, _) => false,
        };
        if hit {
            Status::Done
        } else {
            Status::Dead
        }
    }

    fn axioms(&self, tables: &Vec<Vec<Option<usize>>>) -> Status {
        for c in self.checks {
            match c.scan(self.frame, tables, |_| false) {
                Verdict3::Holds => {}
                Verdict3::Fails => return Status::Dead,
                Verdict3::Need(o, c) => return Status::Need(o, c),
            }
        }
        Status::Done
    }

    fn consistent(&self, tables: &[Vec<Option<usize>>], op: usize, cell: usize, v: usize) -> bool {
        let space = &self.frame.spaces[op];
        let m = &self.frame.carrier;
        tables[op].iter().enumerate().all(|(c, w)| match w {
            Some(w) if c != cell => m.d(v, *w) <= space.dist(c, cell),
            _ => true,
        })
    }

    fn branch(&mut self, tables: &mut Vec<Vec<Option<usize>>>, op: usize, cell: usize) -> bool {
        for v in 0..self.frame.carrier.len() {
            if !self.consistent(tables, op, cell, v) {
                continue;
            }
            tables[op][cell] = Some(v);
            if self.dfs(tables) {
                return true;
            }
            if self.out_of_budget {
                break;
            }
        }
        tables[op][cell] = None;
        false
    }

    fn dfs(&mut self, tables: &mut Vec<Vec<Option<usize>>>) -> bool {
        if *self.budget == 0 {
            self.out_of_budget = true;
            return false;
        }
        *self.budget -= 1;
        match self.goal(tables) {
            Status::Dead => return false,
            Status::Need(o, c) => return self.branch(tables, o, c),
            Status::Done => {}
        }
        match self.axioms(tables) {
            Status::Dead => return false,
            Status::Need(o, c) => return self.branch(tables, o, c),
            Status::Done => {}
        }
        let open = tables.iter().enumerate().find_map(|(o, t)| t.iter().position(Option::is_none).map(|c| (o, c)));
        match open {
            Some((o, c)) => self.branch(tables, o, c),
            None => true,
        }
    }
}
