use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{NodeId, SemanticGraph};
use crate::prompting::format_subtask_cue;
use crate::scene::Relation;

use super::{Builder, DslError, Filter, PlannerOutput, PlannerProgram, Pred, Query, Step};

/// Variable bindings plus the task-memory facts predicates can read.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env {
    pub vars: BTreeMap<String, NodeId>,
    pub done: BTreeSet<String>,
    pub planned: Vec<String>,
}

impl Env {
    fn get(&self, var: &str) -> Result<NodeId, DslError> {
        self.vars.get(var).copied().ok_or_else(|| DslError::UnboundVariable(var.to_string()))
    }

    fn step_done(&self, id: &str) -> bool {
        if self.done.contains(id) {
            return true;
        }
        let prefix = format!("{id}.");
        let mut expanded = self.planned.iter().filter(|s| s.starts_with(&prefix)).peekable();
        expanded.peek().is_some() && expanded.all(|s| self.done.contains(s))
    }
}

/// Evaluate a query to a node set, ascending by id. The arm is only
/// returned when asked for by class.
pub fn eval_query(q: &Query, graph: &SemanticGraph, env: &Env) -> Result<Vec<NodeId>, DslError> {
    Ok(match q {
        Query::Objects(filters) => {
            let wants_arm = filters.iter().any(|f| f == &Filter::Class("arm".into()));
            let mut out = Vec::new();
            'nodes: for n in &graph.nodes {
                if n.class_name == "arm" && !wants_arm {
                    continue;
                }
                for f in filters {
                    let keep = match f {
                        Filter::Class(c) => &n.class_name == c,
                        Filter::Attr(k, v) => n.attributes.get(k) == Some(v),
                        Filter::In(b) => graph.relation_holds(n.node_id, env.get(b)?, Relation::In),
                        Filter::On(b) => graph.relation_holds(n.node_id, env.get(b)?, Relation::On),
                        Filter::Near(b) => graph.relation_holds(n.node_id, env.get(b)?, Relation::Near),
                    };
                    if !keep {
                        continue 'nodes;
                    }
                }
                out.push(n.node_id);
            }
            out
        }
        Query::First(inner) => eval_query(inner, graph, env)?.into_iter().take(1).collect(),
        Query::ContainerOf(v) => graph.container_of(env.get(v)?).into_iter().collect(),
        Query::EmptyContainers(class) => graph.empty_containers(class),
        Query::Other(inner, v) => {
            let x = env.get(v)?;
            eval_query(inner, graph, env)?.into_iter().filter(|&n| n != x).collect()
        }
    })
}

pub fn eval_predicate(p: &Pred, graph: &SemanticGraph, env: &Env) -> Result<bool, DslError> {
    let rel = |a: &str, b: &str, r| Ok::<_, DslError>(graph.relation_holds(env.get(a)?, env.get(b)?, r));
    Ok(match p {
        Pred::In(a, b) => rel(a, b, Relation::In)?,
        Pred::On(a, b) => rel(a, b, Relation::On)?,
        Pred::Near(a, b) => rel(a, b, Relation::Near)?,
        Pred::Holding(x) => graph.holding() == Some(env.get(x)?),
        Pred::HandEmpty => graph.holding().is_none(),
        Pred::Done(id) => env.step_done(id),
        Pred::And(ps) => {
            for q in ps {
                if !eval_predicate(q, graph, env)? {
                    return Ok(false);
                }
            }
            true
        }
        Pred::Or(ps) => {
            for q in ps {
                if eval_predicate(q, graph, env)? {
                    return Ok(true);
                }
            }
            false
        }
        Pred::Not(q) => !eval_predicate(q, graph, env)?,
        Pred::True => true,
    })
}

/// Task memory decoded from its string records.
#[derive(Default)]
struct Memory {
    binds: BTreeMap<String, NodeId>,
    scopes: BTreeMap<String, BTreeMap<String, NodeId>>,
    plan: Option<Vec<String>>,
    done: BTreeSet<String>,
}

fn parse_assign(s: &str, record: &str) -> Result<(String, NodeId), DslError> {
    let bad = || DslError::CorruptMemory(record.to_string());
    let (var, id) = s.split_once('=').ok_or_else(bad)?;
    Ok((var.to_string(), id.parse().map_err(|_| bad())?))
}

impl Memory {
    fn read(records: &[String]) -> Result<Self, DslError> {
        let mut m = Memory::default();
        for r in records {
            if let Some(rest) = r.strip_prefix("bind:") {
                let (var, id) = parse_assign(rest, r)?;
                m.binds.insert(var, id);
            } else if let Some(rest) = r.strip_prefix("scope:") {
                let (step, assign) = rest.split_once(':').ok_or_else(|| DslError::CorruptMemory(r.clone()))?;
                let (var, id) = parse_assign(assign, r)?;
                m.scopes.entry(step.to_string()).or_default().insert(var, id);
            } else if let Some(rest) = r.strip_prefix("plan:") {
                m.plan = Some(if rest.is_empty() { Vec::new() } else { rest.split(',').map(str::to_string).collect() });
            } else if let Some(rest) = r.strip_prefix("done:") {
                m.done.insert(rest.to_string());
            }
        }
        Ok(m)
    }
}

fn bind_one(var: &str, q: &Query, graph: &SemanticGraph, env: &Env) -> Result<NodeId, DslError> {
    let found = eval_query(q, graph, env)?;
    match found.as_slice() {
        [] => Err(DslError::UnboundVariable(var.to_string())),
        [one] => Ok(*one),
        _ => Err(DslError::AmbiguousBinding(var.to_string())),
    }
}

/// Expand the builder into (step id, scope) pairs.
fn build(
    items: &[Builder],
    graph: &SemanticGraph,
    env: &Env,
    out: &mut Vec<(String, BTreeMap<String, NodeId>)>,
) -> Result<(), DslError> {
    for item in items {
        match item {
            Builder::Step(s) => out.push((s.id.clone(), BTreeMap::new())),
            Builder::If { cond, then, otherwise } => {
                let branch = if eval_predicate(cond, graph, env)? { then } else { otherwise };
                build(branch, graph, env, out)?;
            }
            Builder::ForEach { var, query, steps } => {
                for (k, node) in eval_query(query, graph, env)?.into_iter().enumerate() {
                    for s in steps {
                        out.push((format!("{}.{}", s.id, k + 1), BTreeMap::from([(var.clone(), node)])));
                    }
                }
            }
        }
    }
    Ok(())
}

fn definition<'a>(program: &'a PlannerProgram, planned_id: &str) -> Result<&'a Step, DslError> {
    let base = planned_id.split_once('.').map_or(planned_id, |(b, _)| b);
    program.step(base).ok_or_else(|| DslError::CorruptMemory(format!("plan:{planned_id}")))
}

fn emit(step: &Step, action_idx: usize, id: &str, graph: &SemanticGraph, env: &Env) -> Result<PlannerOutput, DslError> {
    let action = &step.actions[action_idx];
    let mut names = BTreeMap::new();
    for (var, &node) in &env.vars {
        if let Some(n) = graph.node(node) {
            names.insert(var.clone(), n.name.clone());
        }
    }
    let subtask_instruction = format_subtask_cue(&action.template, &names).map_err(|e| match e {
        crate::prompting::PromptError::UnresolvedHole(v) => DslError::UnboundVariable(v),
        other => DslError::CorruptMemory(other.to_string()),
    })?;
    let relevant_objects = action.focus.iter().map(|v| env.get(v)).collect::<Result<_, _>>()?;
    Ok(PlannerOutput { subtask_instruction, relevant_objects, done: false, emitted_step: Some(id.to_string()) })
}

/// One planner call. The first call binds roles and fixes the step list in
/// `graph.task_memory`; every call then records finished steps and returns
/// the first unfinished step's instruction.
pub fn evaluate_policy(program: &PlannerProgram, graph: &mut SemanticGraph) -> Result<PlannerOutput, DslError> {
    let mem = Memory::read(&graph.task_memory)?;
    let (vars, scopes, planned) = match mem.plan {
        Some(plan) => (mem.binds, mem.scopes, plan),
        None => {
            let mut env = Env::default();
            for b in &program.bindings {
                let node = bind_one(&b.var, &b.query, graph, &env)?;
                env.vars.insert(b.var.clone(), node);
            }
            let mut expanded = Vec::new();
            build(&program.plan, graph, &env, &mut expanded)?;
            for b in &program.bindings {
                graph.task_memory.push(format!("bind:{}={}", b.var, env.vars[&b.var]));
            }
            let mut scopes = BTreeMap::new();
            for (id, scope) in &expanded {
                for (var, node) in scope {
                    graph.task_memory.push(format!("scope:{id}:{var}={node}"));
                }
                scopes.insert(id.clone(), scope.clone());
            }
            let ids: Vec<String> = expanded.into_iter().map(|(id, _)| id).collect();
            graph.task_memory.push(format!("plan:{}", ids.join(",")));
            graph.bindings = env.vars.clone();
            (env.vars, scopes, ids)
        }
    };
    for (var, &node) in vars.iter().chain(scopes.values().flatten()) {
        if graph.node(node).is_none() {
            return Err(DslError::StaleNode { var: var.clone(), node });
        }
    }

    let mut env = Env { vars, done: mem.done, planned: planned.clone() };
    for id in &planned {
        if env.done.contains(id) {
            continue;
        }
        let step = definition(program, id)?;
        let mut local = env.clone();
        if let Some(scope) = scopes.get(id) {
            local.vars.extend(scope.iter().map(|(k, v)| (k.clone(), *v)));
        }
        if eval_predicate(&step.goal, graph, &local)? {
            graph.task_memory.push(format!("done:{id}"));
            env.done.insert(id.clone());
            continue;
        }
        let last = step.actions.len() - 1;
        for (i, action) in step.actions.iter().enumerate() {
            if i == last || eval_predicate(&action.guard, graph, &local)? {
                return emit(step, i, id, graph, &local);
            }
        }
    }
    Ok(PlannerOutput::finished())
}
