//! Syntax tree for the query language. `Display` renders canonical source
//! that parses back to an equal tree.

use std::fmt::{self, Display, Formatter, Write as _};

use crate::value::{fmt_real, ValueType};

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    CreateType {
        name: String,
        supertypes: Vec<String>,
        functions: Vec<FunctionDecl>,
    },
    CreateInstance {
        type_name: String,
        functions: Vec<String>,
        instances: Vec<InstanceSpec>,
    },
    CreateFunction(DslFunction),
    CreateTrigger(TriggerSpec),
    Set(SetStmt),
    Select(SelectExpr),
    AddType {
        type_name: String,
        target: Expr,
    },
    Learn {
        net: Expr,
        repeat: u64,
    },
    Connect {
        from: Expr,
        to: Vec<Expr>,
        weight: Option<Expr>,
    },
    Import {
        path: String,
        type_name: String,
    },
    /// Inserts every row of a stream-valued expression into a type.
    Insert {
        source: Expr,
        target: String,
        fields: Vec<String>,
    },
    Delete(Expr),
    Call {
        function: String,
        args: Vec<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub value_type: ValueType,
    pub multivalued: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub name: Option<String>,
    pub args: Vec<Expr>,
}

/// A query-language procedure of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct DslFunction {
    pub name: String,
    pub param: String,
    pub param_type: String,
    pub body: Vec<SetStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerSpec {
    pub watched: String,
    pub projection: Vec<String>,
    pub net: Expr,
    pub target: String,
    pub fields: Vec<String>,
    pub back_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetStmt {
    pub function: String,
    pub target: Expr,
    pub value: Expr,
    pub each: Option<ForEach>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub type_name: String,
    pub var: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForEach {
    pub bindings: Vec<Binding>,
    pub filter: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    None,
    ForEach(Vec<Binding>),
    /// `from T [alias]`: bare function names in the projection apply to the row object.
    From {
        type_name: String,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectExpr {
    pub projection: Vec<Expr>,
    pub source: Source,
    /// Conjunction evaluated left to right.
    pub filter: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Compare { op: CompareOp, lhs: Expr, rhs: Expr },
    In { item: Expr, set: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Real(f64),
    Integer(i64),
    Text(String),
    Null,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Ident(String),
    Apply {
        function: String,
        args: Vec<Expr>,
    },
    /// `f(Hull x)`: nearest binding of `f` at or above `x`.
    Hull {
        function: String,
        arg: Box<Expr>,
    },
    Select(Box<SelectExpr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Neg(Box<Expr>),
    Tuple(Vec<Expr>),
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string())
    }

    pub fn apply(function: &str, args: Vec<Expr>) -> Expr {
        Expr::Apply { function: function.to_string(), args }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }
}

fn join<T: Display>(items: &[T], sep: &str) -> String {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write!(out, "{item}").expect("string write");
    }
    out
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Real(x) => f.write_str(&fmt_real(*x)),
            Literal::Integer(i) => write!(f, "{i}"),
            Literal::Text(s) => f.write_str(&quote(s)),
            Literal::Null => f.write_str("null"),
        }
    }
}

impl Expr {
    fn fmt_prec(&self, f: &mut Formatter<'_>, min: u8) -> fmt::Result {
        match self {
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                let paren = p < min;
                if paren {
                    f.write_str("(")?;
                }
                lhs.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                // Left-associative: an equal-precedence right operand needs parentheses.
                rhs.fmt_prec(f, p + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Neg(inner) => {
                f.write_str("-")?;
                if matches!(**inner, Expr::Neg(_)) {
                    // `--` would open a comment.
                    write!(f, "({inner})")
                } else {
                    inner.fmt_prec(f, 3)
                }
            }
            Expr::Literal(Literal::Real(x)) if *x < 0.0 || x.is_sign_negative() => {
                if min > 0 {
                    write!(f, "({})", fmt_real(*x))
                } else {
                    f.write_str(&fmt_real(*x))
                }
            }
            Expr::Literal(Literal::Integer(i)) if *i < 0 && min > 0 => write!(f, "({i})"),
            other => write!(f, "{other}"),
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Apply { function, args } => write!(f, "{function}({})", join(args, ", ")),
            Expr::Hull { function, arg } => write!(f, "{function}(Hull {arg})"),
            Expr::Select(sel) => write!(f, "({sel})"),
            Expr::Tuple(items) if items.len() == 1 => write!(f, "({},)", items[0]),
            Expr::Tuple(items) => write!(f, "({})", join(items, ", ")),
            Expr::Binary { .. } | Expr::Neg(_) => self.fmt_prec(f, 0),
        }
    }
}

impl Display for CompareOp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        })
    }
}

impl Display for Condition {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Compare { op, lhs, rhs } => write!(f, "{lhs} {op} {rhs}"),
            Condition::In { item, set } => match set {
                Expr::Select(_) | Expr::Tuple(_) => write!(f, "{item} in {set}"),
                other => write!(f, "{item} in ({other})"),
            },
        }
    }
}

impl Display for Binding {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.type_name, self.var)
    }
}

fn fmt_filter(f: &mut Formatter<'_>, filter: &[Condition]) -> fmt::Result {
    if !filter.is_empty() {
        write!(f, " where {}", join(filter, " and "))?;
    }
    Ok(())
}

impl Display for SelectExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "select {}", join(&self.projection, ", "))?;
        match &self.source {
            Source::None => {}
            Source::ForEach(bindings) => write!(f, " for each {}", join(bindings, ", "))?,
            Source::From { type_name, alias } => {
                write!(f, " from {type_name}")?;
                if let Some(a) = alias {
                    write!(f, " {a}")?;
                }
            }
        }
        fmt_filter(f, &self.filter)
    }
}

impl Display for SetStmt {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "Set {}({}) = {}", self.function, self.target, self.value)?;
        if let Some(each) = &self.each {
            write!(f, " for each {}", join(&each.bindings, ", "))?;
            fmt_filter(f, &each.filter)?;
        }
        Ok(())
    }
}

impl Display for FunctionDecl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name, self.value_type)?;
        if self.multivalued {
            f.write_str(" many")?;
        }
        Ok(())
    }
}

impl Display for InstanceSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match (&self.name, self.args.is_empty()) {
            (Some(n), true) => f.write_str(n),
            (Some(n), false) => write!(f, "{n}({})", join(&self.args, ", ")),
            (None, _) => write!(f, "({})", join(&self.args, ", ")),
        }
    }
}

impl Display for DslFunction {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "Create function {}({} {}) as", self.name, self.param, self.param_type)?;
        writeln!(f, "begin")?;
        for stmt in &self.body {
            writeln!(f, "  {stmt};")?;
        }
        f.write_str("end")
    }
}

impl Display for TriggerSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Create trigger on {} ({}) evaluate {} into {} ({})",
            self.watched,
            self.projection.join(", "),
            self.net,
            self.target,
            self.fields.join(", ")
        )?;
        if let Some(r) = &self.back_ref {
            write!(f, " ref {r}")?;
        }
        Ok(())
    }
}

/// Renders a statement without its terminating `;`.
impl Display for Statement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Statement::CreateType { name, supertypes, functions } => {
                write!(f, "Create type {name}")?;
                if !supertypes.is_empty() {
                    write!(f, " subtype of {}", supertypes.join(", "))?;
                }
                write!(f, " ({})", join(functions, ", "))
            }
            Statement::CreateInstance { type_name, functions, instances } => {
                write!(f, "Create {type_name} ({}) instance {}", functions.join(", "), join(instances, ", "))
            }
            Statement::CreateFunction(func) => write!(f, "{func}"),
            Statement::CreateTrigger(t) => write!(f, "{t}"),
            Statement::Set(s) => write!(f, "{s}"),
            Statement::Select(s) => {
                let text = s.to_string();
                // Capitalized keyword for readability; parsing is case-insensitive.
                write!(f, "Select{}", &text["select".len()..])
            }
            Statement::AddType { type_name, target } => write!(f, "Add type {type_name} to {target}"),
            Statement::Learn { net, repeat } => write!(f, "Learn {net} repeat {repeat}"),
            Statement::Connect { from, to, weight } => {
                write!(f, "Connect {from} to ({})", join(to, ", "))?;
                if let Some(w) = weight {
                    write!(f, " weight {w}")?;
                }
                Ok(())
            }
            Statement::Import { path, type_name } => write!(f, "Import {} into {type_name}", quote(path)),
            Statement::Insert { source, target, fields } => {
                write!(f, "Insert {source} into {target} ({})", fields.join(", "))
            }
            Statement::Delete(e) => write!(f, "Delete {e}"),
            Statement::Call { function, args } => write!(f, "{function}({})", join(args, ", ")),
        }
    }
}
