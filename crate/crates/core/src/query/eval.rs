use std::collections::{BTreeSet, HashSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{BindingSet, FilterOperand, FilterValue, Query, QueryError, QueryForm};
use crate::store::{Graph, PatternTerm, Term, TermId, Triple, TriplePattern};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateSummary {
    pub deleted: usize,
    pub inserted: usize,
}

// Only breaks ties between patterns with the same number of bound slots, so a
// coarse count is enough; counting further shows up in per-request cost.
const ESTIMATE_CAP: usize = 128;

#[derive(Clone, Copy)]
enum Slot {
    Const(TermId),
    Var(usize),
}

enum Check {
    /// Bound term must be one of these ids.
    Ids(HashSet<TermId>),
    /// `STR()` of the bound term must be one of these strings.
    Strings(HashSet<String>),
}

struct Step {
    slots: [Slot; 3],
    /// Variables first bound by this step, with the filters that test them.
    filters: Vec<(usize, Check)>,
}

/// A query compiled against one graph: constants resolved to ids, variables
/// to indices, patterns in join order.
struct Plan {
    vars: Vec<String>,
    steps: Vec<Step>,
}

fn require(q: &Query, expected: QueryForm) -> Result<(), QueryError> {
    if q.form == expected {
        Ok(())
    } else {
        Err(QueryError::WrongForm {
            expected,
            actual: q.form,
        })
    }
}

/// True iff at least one solution satisfies every pattern and filter.
pub fn eval_ask(q: &Query, g: &Graph) -> Result<bool, QueryError> {
    require(q, QueryForm::Ask)?;
    Ok(ask_with(q, g, None))
}

pub(crate) fn ask_with(q: &Query, g: &Graph, order: Option<&[usize]>) -> bool {
    let Some(plan) = Plan::compile(q, g, order) else {
        return false;
    };
    let mut found = false;
    plan.run(g, &mut |_| {
        found = true;
        ControlFlow::Break(())
    });
    found
}

/// All solutions projected onto the query's variables, rows sorted.
pub fn eval_select(q: &Query, g: &Graph) -> Result<BindingSet, QueryError> {
    require(q, QueryForm::Select)?;
    let mut out = BindingSet::new(q.projection.clone());
    let Some(plan) = Plan::compile(q, g, None) else {
        return Ok(out);
    };
    let cols: Vec<usize> = q.projection.iter().map(|v| plan.var_index(v)).collect();
    plan.run(g, &mut |b| {
        out.push_row(
            cols.iter()
                .map(|&c| g.term(b[c].expect("projected variables are bound")).clone()),
        );
        ControlFlow::Continue(())
    });
    out.sort_rows();
    Ok(out)
}

/// Computes every solution first, then removes all instantiated delete
/// triples, then adds all instantiated insert triples. Instantiations that
/// are not valid triples (e.g. a literal subject) are skipped.
pub fn eval_update(q: &Query, g: &mut Graph) -> Result<UpdateSummary, QueryError> {
    require(q, QueryForm::Update)?;
    let mut deletes = BTreeSet::new();
    let mut inserts = BTreeSet::new();
    if let Some(plan) = Plan::compile(q, g, None) {
        let graph: &Graph = g;
        plan.run(graph, &mut |b| {
            instantiate(&q.delete_template, &plan, b, graph, &mut deletes);
            instantiate(&q.insert_template, &plan, b, graph, &mut inserts);
            ControlFlow::Continue(())
        });
    }
    let deleted = deletes.iter().filter(|t| g.remove(t)).count();
    let inserted = inserts.into_iter().filter(|t| g.insert(t.clone())).count();
    Ok(UpdateSummary { deleted, inserted })
}

fn instantiate(
    template: &[TriplePattern],
    plan: &Plan,
    binding: &[Option<TermId>],
    g: &Graph,
    out: &mut BTreeSet<Triple>,
) {
    let resolve = |pt: &PatternTerm| -> Term {
        match pt {
            PatternTerm::Term(t) => t.clone(),
            PatternTerm::Var(v) => {
                let id = binding[plan.var_index(v)].expect("template variables are bound");
                g.term(id).clone()
            }
        }
    };
    for tp in template {
        if let Ok(t) = Triple::new(resolve(&tp.subject), resolve(&tp.predicate), resolve(&tp.object)) {
            out.insert(t);
        }
    }
}

fn str_of(t: &Term) -> &str {
    t.lexical()
}

impl Plan {
    /// `None` when a constant of the pattern is absent from the graph, so no
    /// solution can exist.
    fn compile(q: &Query, g: &Graph, order: Option<&[usize]>) -> Option<Plan> {
        let vars = q.bgp_variables();
        let var_idx = |v: &str| vars.iter().position(|x| x == v).expect("bgp variable");
        let mut compiled: Vec<[Slot; 3]> = Vec::with_capacity(q.bgp.len());
        for tp in &q.bgp {
            let mut slots = [Slot::Var(0); 3];
            for (slot, pos) in slots.iter_mut().zip(tp.positions()) {
                *slot = match pos {
                    PatternTerm::Var(v) => Slot::Var(var_idx(v)),
                    PatternTerm::Term(t) => Slot::Const(g.id_of(t)?),
                };
            }
            compiled.push(slots);
        }

        let order = match order {
            Some(o) => o.to_vec(),
            None => greedy_order(&compiled, vars.len(), g),
        };

        let mut bound = vec![false; vars.len()];
        let mut steps = Vec::with_capacity(order.len());
        for &i in &order {
            let slots = compiled[i];
            let mut filters = Vec::new();
            for slot in slots {
                if let Slot::Var(v) = slot {
                    if !bound[v] {
                        bound[v] = true;
                        for f in q.filters.iter().filter(|f| f.lhs.variable() == vars[v]) {
                            filters.push((v, compile_filter(&f.lhs, &f.rhs, g)));
                        }
                    }
                }
            }
            steps.push(Step { slots, filters });
        }
        Some(Plan { vars, steps })
    }

    fn var_index(&self, v: &str) -> usize {
        self.vars.iter().position(|x| x == v).expect("variable in plan")
    }

    fn run(&self, g: &Graph, emit: &mut dyn FnMut(&[Option<TermId>]) -> ControlFlow<()>) {
        let mut binding = vec![None; self.vars.len()];
        let _ = self.step(0, g, &mut binding, emit);
    }

    fn step(
        &self,
        depth: usize,
        g: &Graph,
        binding: &mut Vec<Option<TermId>>,
        emit: &mut dyn FnMut(&[Option<TermId>]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let Some(step) = self.steps.get(depth) else {
            return emit(binding);
        };
        let ground = step.slots.map(|s| match s {
            Slot::Const(id) => Some(id),
            Slot::Var(v) => binding[v],
        });
        for key in g.scan(ground[0], ground[1], ground[2]) {
            let mut newly = [usize::MAX; 3];
            let mut ok = true;
            for (k, slot) in step.slots.iter().enumerate() {
                if let Slot::Var(v) = *slot {
                    match binding[v] {
                        Some(id) if id != key[k] => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            binding[v] = Some(key[k]);
                            newly[k] = v;
                        }
                    }
                }
            }
            ok = ok
                && step.filters.iter().all(|(v, check)| {
                    let id = binding[*v].expect("filter variable bound at this step");
                    match check {
                        Check::Ids(ids) => ids.contains(&id),
                        Check::Strings(strs) => strs.contains(str_of(g.term(id))),
                    }
                });
            let flow = if ok {
                self.step(depth + 1, g, binding, emit)
            } else {
                ControlFlow::Continue(())
            };
            for v in newly.into_iter().filter(|&v| v != usize::MAX) {
                binding[v] = None;
            }
            flow?;
        }
        ControlFlow::Continue(())
    }
}

fn compile_filter(lhs: &FilterOperand, rhs: &[FilterValue], g: &Graph) -> Check {
    match lhs {
        FilterOperand::Str(_) => Check::Strings(
            rhs.iter()
                .filter_map(|v| match v {
                    FilterValue::Str(t) => Some(str_of(t).to_string()),
                    // a bare term equals a simple string only if it is one
                    FilterValue::Term(t @ Term::Plain(_)) => Some(str_of(t).to_string()),
                    FilterValue::Term(_) => None,
                })
                .collect(),
        ),
        FilterOperand::Var(_) => Check::Ids(
            rhs.iter()
                .filter_map(|v| match v {
                    FilterValue::Term(t) => g.id_of(t),
                    FilterValue::Str(t) => g.id_of(&Term::plain(str_of(t))),
                })
                .collect(),
        ),
    }
}

/// Repeatedly picks the pattern with the most positions bound so far,
/// breaking ties by a capped match count over its constants, then by
/// original position.
fn greedy_order(patterns: &[[Slot; 3]], var_count: usize, g: &Graph) -> Vec<usize> {
    let estimates: Vec<usize> = patterns
        .iter()
        .map(|slots| {
            let c = slots.map(|s| match s {
                Slot::Const(id) => Some(id),
                Slot::Var(_) => None,
            });
            g.count_capped(c[0], c[1], c[2], ESTIMATE_CAP)
        })
        .collect();
    let mut bound = vec![false; var_count];
    let mut remaining: Vec<usize> = (0..patterns.len()).collect();
    let mut order = Vec::with_capacity(patterns.len());
    while !remaining.is_empty() {
        let score = |i: usize| {
            patterns[i]
                .iter()
                .filter(|s| match s {
                    Slot::Const(_) => true,
                    Slot::Var(v) => bound[*v],
                })
                .count()
        };
        let (pick, _) = remaining
            .iter()
            .enumerate()
            .min_by_key(|&(_, &i)| (std::cmp::Reverse(score(i)), estimates[i], i))
            .expect("non-empty");
        let i = remaining.remove(pick);
        for s in patterns[i] {
            if let Slot::Var(v) = s {
                bound[v] = true;
            }
        }
        order.push(i);
    }
    order
}
