//! The query boundary. Every comparison an algorithm makes goes through an
//! [`Environment`], which maps labels to ranks, samples the MNL winner and
//! appends to the ledger. The ledger total is the sample complexity we
//! measure, so there is no other way to draw a winner.

use rand::Rng;

use crate::error::{ModelError, RankError};
use crate::exec::{self, Exec};
use crate::model::{check_subset, Label, LabeledInstance};
use crate::rng::{self, StreamRng};

/// Batches below this many draws run sequentially even in parallel mode.
const PARALLEL_MIN_DRAWS: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedQuery {
    pub set: Vec<Label>,
    pub winner: Label,
}

/// Running count of oracle calls, with an optional per-query log.
#[derive(Debug, Clone, Default)]
pub struct QueryLedger {
    total: u64,
    log: Option<Vec<LoggedQuery>>,
}

impl QueryLedger {
    pub fn total(&self) -> u64 {
        self.total
    }

    /// `None` unless logging was enabled with [`Environment::with_log`].
    pub fn log(&self) -> Option<&[LoggedQuery]> {
        self.log.as_deref()
    }

    fn record(&mut self, set: &[Label], winner: Label) {
        self.total += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(LoggedQuery {
                set: set.to_vec(),
                winner,
            });
        }
    }
}

/// One comparison set that is queried `reps` times per batch, with its own
/// random stream and cumulative win counts (indexed by position in the set).
#[derive(Debug, Clone)]
pub struct QueryUnit {
    set: Vec<Label>,
    cumulative: Vec<f64>,
    rng: StreamRng,
    reps: u64,
    wins: Vec<u64>,
    drawn: Vec<u32>,
}

impl QueryUnit {
    pub fn set(&self) -> &[Label] {
        &self.set
    }

    pub fn wins(&self) -> &[u64] {
        &self.wins
    }

    pub fn reps(&self) -> u64 {
        self.reps
    }

    pub fn set_reps(&mut self, reps: u64) {
        self.reps = reps;
    }

    pub fn observations(&self) -> u64 {
        self.wins.iter().sum()
    }

    #[inline]
    fn draw(&mut self) -> usize {
        let total = *self.cumulative.last().expect("non-empty set");
        let u = self.rng.random::<f64>() * total;
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    fn run(&mut self, keep_draws: bool) {
        self.drawn.clear();
        for _ in 0..self.reps {
            let pos = self.draw();
            self.wins[pos] += 1;
            if keep_draws {
                self.drawn.push(pos as u32);
            }
        }
    }
}

pub struct Environment<'a> {
    labeled: &'a LabeledInstance,
    ledger: QueryLedger,
    budget: u64,
    exec: Exec,
}

impl<'a> Environment<'a> {
    pub fn new(labeled: &'a LabeledInstance, budget: u64) -> Self {
        Self {
            labeled,
            ledger: QueryLedger::default(),
            budget,
            exec: Exec::Sequential,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Keeps every `(set, winner)` pair. Memory grows with the query count.
    pub fn with_log(mut self) -> Self {
        self.ledger.log = Some(Vec::new());
        self
    }

    pub fn n(&self) -> usize {
        self.labeled.n()
    }

    /// Maximum comparison-set size.
    pub fn l(&self) -> usize {
        self.labeled.instance().l()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.labeled.labels()
    }

    pub fn queries(&self) -> u64 {
        self.ledger.total
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    /// Independent random stream for `tags` under this run's master seed.
    pub fn stream(&self, tags: &[u64]) -> StreamRng {
        rng::stream(self.labeled.seed(), tags)
    }

    fn ranks(&self, set: &[Label]) -> Result<Vec<usize>, ModelError> {
        let n = self.n();
        let ranks = set
            .iter()
            .map(|l| {
                if l.index() < n {
                    Ok(self.labeled.rank_of(*l))
                } else {
                    Err(ModelError::OutOfRange { index: l.index(), n })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        check_subset(&ranks, n, self.l())?;
        Ok(ranks)
    }

    /// Prepares a comparison set for repeated querying. No queries are made.
    pub fn unit(&self, set: Vec<Label>, reps: u64, tags: &[u64]) -> Result<QueryUnit, ModelError> {
        let theta = self.labeled.instance().theta();
        let cumulative = self
            .ranks(&set)?
            .iter()
            .scan(0.0, |acc, &r| {
                *acc += theta[r];
                Some(*acc)
            })
            .collect();
        let size = set.len();
        Ok(QueryUnit {
            set,
            cumulative,
            rng: self.stream(tags),
            reps,
            wins: vec![0; size],
            drawn: Vec::new(),
        })
    }

    /// Queries every unit `reps` times. The batch is all-or-nothing: if it
    /// would cross the budget (or `cap`, an absolute ledger total) no query
    /// is made.
    pub fn run_units(&mut self, units: &mut [QueryUnit], cap: Option<u64>) -> Result<(), RankError> {
        let cost: u64 = units.iter().map(|u| u.reps).sum();
        let after = self.ledger.total + cost;
        if after > self.budget {
            return Err(RankError::BudgetExhausted {
                used: self.ledger.total,
                limit: self.budget,
                partial: None,
            });
        }
        if let Some(cap) = cap {
            if after > cap {
                return Err(RankError::PhaseCap {
                    used: self.ledger.total,
                    cap,
                });
            }
        }
        let logging = self.ledger.log.is_some();
        let exec = if cost >= PARALLEL_MIN_DRAWS {
            self.exec
        } else {
            Exec::Sequential
        };
        exec::for_each_mut(exec, units, |u| u.run(logging));
        if logging {
            for u in units.iter() {
                for &pos in &u.drawn {
                    self.ledger.record(&u.set, u.set[pos as usize]);
                }
            }
        } else {
            self.ledger.total = after;
        }
        Ok(())
    }

    /// Fails with `BudgetExhausted` if `cost` more queries would take the
    /// ledger past `limit`, a limit tighter than the environment budget.
    pub(crate) fn ensure_within(&self, cost: u64, limit: u64) -> Result<(), RankError> {
        if self.ledger.total + cost > limit {
            return Err(RankError::BudgetExhausted {
                used: self.ledger.total,
                limit,
                partial: None,
            });
        }
        Ok(())
    }

    /// A single MNL draw over `set`.
    pub fn sample_winner(&mut self, set: &[Label], rng: &mut StreamRng) -> Result<Label, RankError> {
        let ranks = self.ranks(set)?;
        if self.ledger.total >= self.budget {
            return Err(RankError::BudgetExhausted {
                used: self.ledger.total,
                limit: self.budget,
                partial: None,
            });
        }
        let theta = self.labeled.instance().theta();
        let total: f64 = ranks.iter().map(|&r| theta[r]).sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pos = set.len() - 1;
        for (i, &r) in ranks.iter().enumerate() {
            acc += theta[r];
            if u < acc {
                pos = i;
                break;
            }
        }
        let winner = set[pos];
        self.ledger.record(set, winner);
        Ok(winner)
    }
}
