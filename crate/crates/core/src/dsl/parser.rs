use std::collections::BTreeSet;

use super::lexer::{tokenize, Token, TokenKind};
use super::{Action, Binding, Builder, DslError, Filter, PlannerProgram, Pos, Pred, Query, Step};

#[derive(Debug, Clone)]
enum Sexp {
    List { items: Vec<Sexp>, pos: Pos, close: Pos },
    Atom(Token),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::List { pos, .. } => *pos,
            Sexp::Atom(t) => t.pos,
        }
    }

    fn describe(&self) -> String {
        match self {
            Sexp::List { items, .. } => match items.first() {
                Some(Sexp::Atom(Token { kind: TokenKind::Symbol(s), .. })) => format!("`({s}`"),
                _ => "`(`".into(),
            },
            Sexp::Atom(t) => t.kind.describe(),
        }
    }
}

fn expected(pos: Pos, what: &[&str], found: String) -> DslError {
    DslError::Parse { pos, expected: what.iter().map(|s| s.to_string()).collect(), found }
}

fn read(tokens: &[Token], end: Pos) -> Result<Sexp, DslError> {
    let mut stack: Vec<(Pos, Vec<Sexp>)> = Vec::new();
    let mut top: Option<Sexp> = None;
    for t in tokens {
        if top.is_some() {
            return Err(expected(t.pos, &["end of input"], t.kind.describe()));
        }
        match &t.kind {
            TokenKind::Open => stack.push((t.pos, Vec::new())),
            TokenKind::Close => {
                let Some((pos, items)) = stack.pop() else {
                    return Err(expected(t.pos, &["`(`"], "`)`".into()));
                };
                let list = Sexp::List { items, pos, close: t.pos };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(list),
                    None => top = Some(list),
                }
            }
            _ => match stack.last_mut() {
                Some((_, parent)) => parent.push(Sexp::Atom(t.clone())),
                None => return Err(expected(t.pos, &["`(`"], t.kind.describe())),
            },
        }
    }
    if !stack.is_empty() {
        return Err(expected(end, &["`)`"], "end of input".into()));
    }
    top.ok_or_else(|| expected(end, &["`(policy`"], "end of input".into()))
}

fn end_pos(text: &str) -> Pos {
    let mut pos = Pos { line: 1, col: 1 };
    for c in text.chars() {
        if c == '\n' {
            pos.line += 1;
            pos.col = 1;
        } else {
            pos.col += 1;
        }
    }
    pos
}

/// A list form split into head symbol and arguments.
struct Form<'a> {
    head: &'a str,
    args: &'a [Sexp],
    pos: Pos,
    close: Pos,
}

const QUERY_FORMS: &[&str] = &["objects", "first", "container-of", "empty-containers", "other"];
const PRED_FORMS: &[&str] = &["in", "on", "near", "holding", "hand-empty", "done", "and", "or", "not", "true"];
const BUILDER_FORMS: &[&str] = &["step", "if", "for-each"];

fn quoted(forms: &[&str]) -> Vec<String> {
    forms.iter().map(|f| format!("`({f}`")).collect()
}

fn form<'a>(s: &'a Sexp, allowed: &[&str]) -> Result<Form<'a>, DslError> {
    let Sexp::List { items, pos, close } = s else {
        return Err(DslError::Parse { pos: s.pos(), expected: quoted(allowed), found: s.describe() });
    };
    match items.first() {
        Some(Sexp::Atom(Token { kind: TokenKind::Symbol(h), .. })) if allowed.contains(&h.as_str()) => {
            Ok(Form { head: h, args: &items[1..], pos: *pos, close: *close })
        }
        Some(Sexp::Atom(Token { kind: TokenKind::Symbol(h), pos })) => {
            Err(DslError::UnknownForm { pos: *pos, form: h.clone() })
        }
        Some(other) => Err(DslError::Parse { pos: other.pos(), expected: quoted(allowed), found: other.describe() }),
        None => Err(DslError::Parse { pos: *close, expected: quoted(allowed), found: "`)`".into() }),
    }
}

fn arity(f: &Form<'_>, n: usize) -> Result<(), DslError> {
    if f.args.len() == n {
        return Ok(());
    }
    let expected = match n {
        0 => "no arguments".to_string(),
        1 => "1 argument".to_string(),
        n => format!("{n} arguments"),
    };
    Err(DslError::Arity { pos: f.pos, form: f.head.to_string(), expected, found: f.args.len() })
}

fn at_least(f: &Form<'_>, n: usize) -> Result<(), DslError> {
    if f.args.len() >= n {
        return Ok(());
    }
    Err(DslError::Arity { pos: f.pos, form: f.head.to_string(), expected: format!("at least {n}"), found: f.args.len() })
}

fn symbol<'a>(s: &'a Sexp, what: &str) -> Result<(&'a str, Pos), DslError> {
    match s {
        Sexp::Atom(Token { kind: TokenKind::Symbol(v), pos }) => Ok((v, *pos)),
        other => Err(DslError::Parse { pos: other.pos(), expected: vec![what.to_string()], found: other.describe() }),
    }
}

fn string(s: &Sexp) -> Result<(&str, Pos), DslError> {
    match s {
        Sexp::Atom(Token { kind: TokenKind::Str(v), pos }) => Ok((v, *pos)),
        other => Err(DslError::Parse { pos: other.pos(), expected: vec!["string".into()], found: other.describe() }),
    }
}

struct Checker {
    scope: Vec<String>,
    step_ids: BTreeSet<String>,
    done_refs: Vec<(String, Pos)>,
}

impl Checker {
    fn var(&self, s: &Sexp) -> Result<String, DslError> {
        let (v, pos) = symbol(s, "variable")?;
        if !self.scope.iter().any(|b| b == v) {
            return Err(expected(pos, &["bound variable"], format!("`{v}`")));
        }
        Ok(v.to_string())
    }

    fn fresh(&self, s: &Sexp) -> Result<String, DslError> {
        let (v, pos) = symbol(s, "variable")?;
        if self.scope.iter().any(|b| b == v) {
            return Err(expected(pos, &["fresh variable name"], format!("`{v}`")));
        }
        Ok(v.to_string())
    }

    fn query(&self, s: &Sexp) -> Result<Query, DslError> {
        let f = form(s, QUERY_FORMS)?;
        Ok(match f.head {
            "objects" => {
                let mut filters = Vec::new();
                let mut args = f.args.iter();
                while let Some(k) = args.next() {
                    let Sexp::Atom(Token { kind: TokenKind::Keyword(key), pos }) = k else {
                        return Err(expected(k.pos(), &["keyword"], k.describe()));
                    };
                    let Some(v) = args.next() else {
                        return Err(expected(f.close, &["keyword value"], "`)`".into()));
                    };
                    filters.push(match key.as_str() {
                        "in" => Filter::In(self.var(v)?),
                        "on" => Filter::On(self.var(v)?),
                        "near" => Filter::Near(self.var(v)?),
                        "class" => Filter::Class(string(v)?.0.to_string()),
                        _ if key.is_empty() => return Err(expected(*pos, &["keyword"], k.describe())),
                        _ => Filter::Attr(key.clone(), string(v)?.0.to_string()),
                    });
                }
                Query::Objects(filters)
            }
            "first" => {
                arity(&f, 1)?;
                Query::First(Box::new(self.query(&f.args[0])?))
            }
            "container-of" => {
                arity(&f, 1)?;
                Query::ContainerOf(self.var(&f.args[0])?)
            }
            "empty-containers" => {
                arity(&f, 1)?;
                Query::EmptyContainers(string(&f.args[0])?.0.to_string())
            }
            "other" => {
                arity(&f, 2)?;
                Query::Other(Box::new(self.query(&f.args[0])?), self.var(&f.args[1])?)
            }
            _ => unreachable!("head checked by form()"),
        })
    }

    fn pred(&mut self, s: &Sexp) -> Result<Pred, DslError> {
        let f = form(s, PRED_FORMS)?;
        Ok(match f.head {
            "in" | "on" | "near" => {
                arity(&f, 2)?;
                let (a, b) = (self.var(&f.args[0])?, self.var(&f.args[1])?);
                match f.head {
                    "in" => Pred::In(a, b),
                    "on" => Pred::On(a, b),
                    _ => Pred::Near(a, b),
                }
            }
            "holding" => {
                arity(&f, 1)?;
                Pred::Holding(self.var(&f.args[0])?)
            }
            "hand-empty" => {
                arity(&f, 0)?;
                Pred::HandEmpty
            }
            "true" => {
                arity(&f, 0)?;
                Pred::True
            }
            "done" => {
                arity(&f, 1)?;
                let (id, pos) = symbol(&f.args[0], "step id")?;
                self.done_refs.push((id.to_string(), pos));
                Pred::Done(id.to_string())
            }
            "and" | "or" => {
                at_least(&f, 1)?;
                let ps = f.args.iter().map(|a| self.pred(a)).collect::<Result<Vec<_>, _>>()?;
                if f.head == "and" {
                    Pred::And(ps)
                } else {
                    Pred::Or(ps)
                }
            }
            "not" => {
                arity(&f, 1)?;
                Pred::Not(Box::new(self.pred(&f.args[0])?))
            }
            _ => unreachable!("head checked by form()"),
        })
    }

    fn template(&self, text: &str, pos: Pos) -> Result<(), DslError> {
        let mut rest = text;
        while let Some(open) = rest.find(['{', '}']) {
            if rest[open..].starts_with('}') {
                return Err(expected(pos, &["`{` before `}` in template"], format!("{text:?}")));
            }
            let after = &rest[open + 1..];
            let Some(close) = after.find('}') else {
                return Err(expected(pos, &["`}` closing template hole"], format!("{text:?}")));
            };
            let var = &after[..close];
            if !self.scope.iter().any(|b| b == var) {
                return Err(expected(pos, &["template hole naming a bound variable"], format!("`{{{var}}}`")));
            }
            rest = &after[close + 1..];
        }
        Ok(())
    }

    fn action(&mut self, s: &Sexp) -> Result<Action, DslError> {
        let f = form(s, &["when"])?;
        arity(&f, 3)?;
        let guard = self.pred(&f.args[0])?;
        let say = form(&f.args[1], &["say"])?;
        arity(&say, 1)?;
        let (template, tpos) = string(&say.args[0])?;
        self.template(template, tpos)?;
        let focus = form(&f.args[2], &["focus"])?;
        at_least(&focus, 1)?;
        let vars = focus.args.iter().map(|a| self.var(a)).collect::<Result<Vec<_>, _>>()?;
        Ok(Action { guard, template: template.to_string(), focus: vars })
    }

    fn step(&mut self, s: &Sexp) -> Result<Step, DslError> {
        let f = form(s, &["step"])?;
        at_least(&f, 3)?;
        let (id, pos) = symbol(&f.args[0], "step id")?;
        if id.contains('.') {
            return Err(expected(pos, &["step id without `.`"], format!("`{id}`")));
        }
        if !self.step_ids.insert(id.to_string()) {
            return Err(expected(pos, &["unique step id"], format!("`{id}`")));
        }
        let goal_form = form(&f.args[1], &["goal"])?;
        arity(&goal_form, 1)?;
        let goal = self.pred(&goal_form.args[0])?;
        let actions = f.args[2..].iter().map(|a| self.action(a)).collect::<Result<Vec<_>, _>>()?;
        if let Some(last) = actions.last() {
            if last.guard != Pred::True {
                let Sexp::List { items, .. } = f.args.last().expect("at least one action") else { unreachable!() };
                return Err(expected(items[1].pos(), &["`(true)` guard on the final action"], items[1].describe()));
            }
        }
        Ok(Step { id: id.to_string(), goal, actions })
    }

    /// One builder item; a list whose head is itself a list is a group.
    fn builder_item(&mut self, s: &Sexp, out: &mut Vec<Builder>) -> Result<(), DslError> {
        if let Sexp::List { items, .. } = s {
            if matches!(items.first(), Some(Sexp::List { .. })) {
                for it in items {
                    self.builder_item(it, out)?;
                }
                return Ok(());
            }
        }
        let f = form(s, BUILDER_FORMS)?;
        match f.head {
            "step" => out.push(Builder::Step(self.step(s)?)),
            "if" => {
                arity(&f, 3)?;
                let cond = self.pred(&f.args[0])?;
                let mut then = Vec::new();
                self.builder_item(&f.args[1], &mut then)?;
                let mut otherwise = Vec::new();
                self.builder_item(&f.args[2], &mut otherwise)?;
                out.push(Builder::If { cond, then, otherwise });
            }
            "for-each" => {
                at_least(&f, 3)?;
                let var = self.fresh(&f.args[0])?;
                let query = self.query(&f.args[1])?;
                self.scope.push(var.clone());
                let steps = f.args[2..].iter().map(|a| self.step(a)).collect::<Result<Vec<_>, _>>();
                self.scope.pop();
                out.push(Builder::ForEach { var, query, steps: steps? });
            }
            _ => unreachable!("head checked by form()"),
        }
        Ok(())
    }
}

/// Parse and statically check a policy program.
pub fn parse_program(text: &str) -> Result<PlannerProgram, DslError> {
    let tokens = tokenize(text)?;
    let tree = read(&tokens, end_pos(text))?;
    let f = match form(&tree, &["policy"]) {
        Err(DslError::UnknownForm { pos, form }) => {
            return Err(expected(pos, &["`policy`"], format!("`{form}`")));
        }
        other => other?,
    };
    let Some(name) = f.args.first() else {
        return Err(expected(f.close, &["program name"], "`)`".into()));
    };
    let (name, _) = symbol(name, "program name")?;
    let mut ck = Checker { scope: Vec::new(), step_ids: BTreeSet::new(), done_refs: Vec::new() };
    let mut bindings = Vec::new();
    let mut plan = None;
    for item in &f.args[1..] {
        if plan.is_some() {
            return Err(expected(item.pos(), &["`)`"], item.describe()));
        }
        let g = form(item, &["bind", "plan"])?;
        if g.head == "bind" {
            arity(&g, 2)?;
            let var = ck.fresh(&g.args[0])?;
            let query = ck.query(&g.args[1])?;
            ck.scope.push(var.clone());
            bindings.push(Binding { var, query });
        } else {
            at_least(&g, 1)?;
            let mut items = Vec::new();
            for b in g.args {
                ck.builder_item(b, &mut items)?;
            }
            plan = Some(items);
        }
    }
    let Some(plan) = plan else {
        return Err(expected(f.close, &["`(bind`", "`(plan`"], "`)`".into()));
    };
    for (id, pos) in &ck.done_refs {
        if !ck.step_ids.contains(id) {
            return Err(expected(*pos, &["defined step id"], format!("`{id}`")));
        }
    }
    Ok(PlannerProgram { name: name.to_string(), bindings, plan })
}
