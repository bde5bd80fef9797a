use crate::dsl::Dsl;
use crate::error::{Error, Result};
use crate::lang::{edit, Location, Path, Term};
use crate::types::{Subst, Type};

/// State of one inference episode: the accumulated substitution and the next
/// unused variable id.
#[derive(Clone, Debug)]
pub struct Inference {
    pub subst: Subst,
    pub next: u32,
}

impl Inference {
    /// Starts an episode whose fresh variables avoid everything in `t` and `inputs`.
    pub fn for_term(t: &Term, inputs: &[Type]) -> Inference {
        let mut max = inputs.iter().filter_map(Type::max_var).max();
        hole_max_var(t, &mut max);
        Inference {
            subst: Subst::new(),
            next: max.map_or(0, |m| m + 1),
        }
    }

    pub fn fresh(&mut self) -> Type {
        let v = self.next;
        self.next += 1;
        Type::Var(v)
    }
}

fn hole_max_var(t: &Term, max: &mut Option<u32>) {
    match t {
        Term::Hole(ty) => {
            if let Some(m) = ty.max_var() {
                *max = Some(max.map_or(m, |x| x.max(m)));
            }
        }
        Term::App(f, a) => {
            hole_max_var(f, max);
            hole_max_var(a, max);
        }
        _ => {}
    }
}

/// Principal type of `t`, with variables renamed to `t0, t1, ...`.
///
/// Polymorphic primitives are freshened per occurrence; holes contribute their
/// annotation as-is, so holes sharing a variable are constrained together.
pub fn infer(t: &Term, dsl: &Dsl, inputs: &[Type]) -> Result<Type> {
    let mut st = Inference::for_term(t, inputs);
    let ty = infer_in(t, dsl, inputs, &mut st)?;
    Ok(st.subst.apply(&ty).normalized())
}

/// Infers `t` inside an existing episode. The returned type is not yet
/// resolved against `st.subst`.
pub fn infer_in(t: &Term, dsl: &Dsl, inputs: &[Type], st: &mut Inference) -> Result<Type> {
    let mut path = Path::new();
    go(t, dsl, inputs, st, &mut path)
}

fn go(t: &Term, dsl: &Dsl, inputs: &[Type], st: &mut Inference, path: &mut Path) -> Result<Type> {
    match t {
        Term::Prim(name) => dsl
            .get(name)
            .map(|e| e.ty.freshen(&mut st.next))
            .ok_or_else(|| Error::UnknownPrimitive(name.to_string())),
        Term::Input(i) => inputs.get(*i).cloned().ok_or(Error::InputOutOfRange(*i)),
        Term::Hole(ty) => Ok(ty.clone()),
        Term::App(f, a) => {
            path.push(0);
            let tf = go(f, dsl, inputs, st, path)?;
            path.pop();
            path.push(1);
            let ta = go(a, dsl, inputs, st, path)?;
            path.pop();
            match st.subst.apply(&tf) {
                Type::Arrow(param, result) => {
                    if st.subst.unify(&param, &ta).is_err() {
                        let mut at = path.clone();
                        at.push(1);
                        return Err(Error::TypeMismatch {
                            path: at,
                            expected: st.subst.apply(&param),
                            found: st.subst.apply(&ta),
                        });
                    }
                    Ok(*result)
                }
                Type::Var(v) => {
                    let r = st.fresh();
                    st.subst
                        .bind(v, Type::arrow(ta, r.clone()))
                        .map_err(|_| Error::TypeMismatch {
                            path: {
                                let mut at = path.clone();
                                at.push(0);
                                at
                            },
                            expected: Type::arrow(st.subst.apply(&Type::Var(v)), r.clone()),
                            found: Type::Var(v),
                        })?;
                    Ok(r)
                }
                found => {
                    let r = st.fresh();
                    let mut at = path.clone();
                    at.push(0);
                    Err(Error::TypeMismatch {
                        path: at,
                        expected: Type::arrow(st.subst.apply(&ta), r),
                        found,
                    })
                }
            }
        }
    }
}

/// For each path of `l`, the most general type a replacement may have so that
/// the edited program keeps the top-level type of `t`.
///
/// Computed by substituting fresh holes at every path, re-inferring, and
/// pinning the result to the original type.
pub fn type_at(t: &Term, l: &Location, dsl: &Dsl, inputs: &[Type]) -> Result<Vec<Type>> {
    let mut st = Inference::for_term(t, inputs);
    let top = infer_in(t, dsl, inputs, &mut st)?;
    let hole_vars: Vec<Type> = l.paths.iter().map(|_| st.fresh()).collect();
    let holes: Vec<Term> = hole_vars.iter().cloned().map(Term::Hole).collect();
    let edited = edit(t, l, &holes)?;
    let ty = infer_in(&edited, dsl, inputs, &mut st)?;
    st.subst.unify(&ty, &top).map_err(|_| Error::TypeMismatch {
        path: Path::new(),
        expected: st.subst.apply(&top),
        found: st.subst.apply(&ty),
    })?;
    Ok(hole_vars.iter().map(|v| st.subst.apply(v)).collect())
}
