//! Recursive-descent parser. See `docs/grammar.md` for the grammar.

use super::ast::*;
use super::lexer::{tokenize, Keyword, Spanned, Token};
use crate::error::{Error, Position, Result};
use crate::value::ValueType;

/// Parses a script into statements in source order.
pub fn parse_script(src: &str) -> Result<Vec<Statement>> {
    Ok(parse_script_spanned(src)?.into_iter().map(|(s, _)| s).collect())
}

/// Like [`parse_script`], also returning where each statement starts.
pub fn parse_script_spanned(src: &str) -> Result<Vec<(Statement, Position)>> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    loop {
        while p.eat(&Token::Semi) {}
        if p.at(&Token::Eof) {
            return Ok(out);
        }
        let pos = p.pos();
        let stmt = p.statement()?;
        p.expect(&Token::Semi)?;
        out.push((stmt, pos));
    }
}

/// Parses exactly one statement; the trailing `;` is optional.
pub fn parse_statement(src: &str) -> Result<Statement> {
    let mut p = Parser::new(src)?;
    let stmt = p.statement()?;
    while p.eat(&Token::Semi) {}
    p.expect(&Token::Eof)?;
    Ok(stmt)
}

/// Parses a standalone expression (no trailing `;`).
pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect(&Token::Eof)?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Spanned>,
    idx: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser { tokens: tokenize(src)?, idx: 0 })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.idx].token
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.idx + offset).min(self.tokens.len() - 1);
        &self.tokens[i].token
    }

    fn pos(&self) -> Position {
        self.tokens[self.idx].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].token.clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn at(&self, t: &Token) -> bool {
        self.peek() == t
    }

    fn at_kw(&self, k: Keyword) -> bool {
        matches!(self.peek(), Token::Keyword(x) if *x == k)
    }

    /// Contextual keyword: an identifier matched case-insensitively.
    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), Token::Ident(s) if s.eq_ignore_ascii_case(word))
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        if self.at_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.at_word(word) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str]) -> Error {
        Error::Syntax {
            position: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
            at_eof: self.at(&Token::Eof),
        }
    }

    fn expect(&mut self, t: &Token) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(&[&t.to_string()]))
        }
    }

    fn expect_kw(&mut self, k: Keyword) -> Result<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{k}`")]))
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<()> {
        if self.eat_word(word) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{word}`")]))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Token::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>> {
        self.expect(&Token::LParen)?;
        let mut out = Vec::new();
        if !self.eat(&Token::RParen) {
            loop {
                out.push(self.ident()?);
                if self.eat(&Token::RParen) {
                    break;
                }
                self.expect(&Token::Comma)?;
            }
        }
        Ok(out)
    }

    fn statement(&mut self) -> Result<Statement> {
        match self.peek() {
            Token::Keyword(Keyword::Create) => {
                self.bump();
                self.create()
            }
            Token::Keyword(Keyword::Set) => {
                self.bump();
                self.set()
            }
            Token::Keyword(Keyword::Select) => Ok(Statement::Select(self.select()?)),
            Token::Keyword(Keyword::Add) => {
                self.bump();
                self.expect_kw(Keyword::Type)?;
                let type_name = self.ident()?;
                self.expect_word("to")?;
                Ok(Statement::AddType { type_name, target: self.expr()? })
            }
            Token::Keyword(Keyword::Learn) => {
                self.bump();
                let net = self.expr()?;
                let repeat = if self.eat_kw(Keyword::Repeat) {
                    match self.bump() {
                        Token::Integer(n) if n >= 0 => n as u64,
                        _ => return Err(self.error(&["non-negative integer"])),
                    }
                } else {
                    1
                };
                Ok(Statement::Learn { net, repeat })
            }
            Token::Keyword(Keyword::Connect) => {
                self.bump();
                let from = self.expr()?;
                self.expect_word("to")?;
                let to = match self.expr()? {
                    Expr::Tuple(items) => items,
                    single => vec![single],
                };
                let weight = if self.eat_word("weight") { Some(self.expr()?) } else { None };
                Ok(Statement::Connect { from, to, weight })
            }
            Token::Keyword(Keyword::Import) => {
                self.bump();
                let path = match self.bump() {
                    Token::Str(s) => s,
                    _ => return Err(self.error(&["quoted path"])),
                };
                self.expect_kw(Keyword::Into)?;
                Ok(Statement::Import { path, type_name: self.ident()? })
            }
            Token::Keyword(Keyword::Insert) => {
                self.bump();
                let source = self.expr()?;
                self.expect_kw(Keyword::Into)?;
                let target = self.ident()?;
                let fields = self.ident_list()?;
                Ok(Statement::Insert { source, target, fields })
            }
            Token::Keyword(Keyword::Delete) => {
                self.bump();
                Ok(Statement::Delete(self.expr()?))
            }
            Token::Ident(_) if self.peek_at(1) == &Token::LParen => {
                let function = self.ident()?;
                let args = self.args()?;
                Ok(Statement::Call { function, args })
            }
            _ => Err(self.error(&[
                "`create`",
                "`set`",
                "`select`",
                "`add`",
                "`learn`",
                "`connect`",
                "`import`",
                "`insert`",
                "`delete`",
                "function call",
            ])),
        }
    }

    fn create(&mut self) -> Result<Statement> {
        if self.eat_kw(Keyword::Type) {
            let name = self.ident()?;
            return self.type_body(name);
        }
        if self.eat_kw(Keyword::Function) {
            return Ok(Statement::CreateFunction(self.function_def()?));
        }
        if self.at_word("trigger") && matches!(self.peek_at(1), Token::Ident(w) if w.eq_ignore_ascii_case("on")) {
            self.bump();
            return Ok(Statement::CreateTrigger(self.trigger_def()?));
        }
        let name = self.ident()?;
        if self.at_kw(Keyword::Subtype) {
            return self.type_body(name);
        }
        let functions = self.ident_list()?;
        self.expect_kw(Keyword::Instance)?;
        let mut instances = Vec::new();
        loop {
            let name = if let Token::Ident(_) = self.peek() { Some(self.ident()?) } else { None };
            let args = if self.at(&Token::LParen) {
                self.args()?
            } else if name.is_none() {
                return Err(self.error(&["instance name", "`(`"]));
            } else {
                Vec::new()
            };
            instances.push(InstanceSpec { name, args });
            if !self.eat(&Token::Comma) {
                break;
            }
        }
        Ok(Statement::CreateInstance { type_name: name, functions, instances })
    }

    fn type_body(&mut self, name: String) -> Result<Statement> {
        let mut supertypes = Vec::new();
        if self.eat_kw(Keyword::Subtype) {
            self.eat_word("of");
            supertypes.push(self.ident()?);
            while self.at(&Token::Comma) && matches!(self.peek_at(1), Token::Ident(_)) {
                self.bump();
                supertypes.push(self.ident()?);
            }
        }
        let mut functions = Vec::new();
        if self.eat(&Token::LParen) {
            // Declarations may be separated by `,`, `;` or nothing at all.
            while !self.eat(&Token::RParen) {
                let fname = self.ident()?;
                let value_type = self.value_type()?;
                let multivalued = self.eat_kw(Keyword::Many);
                functions.push(FunctionDecl { name: fname, value_type, multivalued });
                while self.eat(&Token::Comma) || self.eat(&Token::Semi) {}
            }
        }
        Ok(Statement::CreateType { name, supertypes, functions })
    }

    fn value_type(&mut self) -> Result<ValueType> {
        if self.eat_kw(Keyword::Function) {
            return Ok(ValueType::FunctionRef);
        }
        if self.eat(&Token::Lt) {
            let mut items = vec![self.value_type()?];
            while self.eat(&Token::Comma) {
                items.push(self.value_type()?);
            }
            self.expect(&Token::Gt)?;
            return Ok(ValueType::Tuple(items));
        }
        let name = self.ident().map_err(|_| self.error(&["type name", "`function`", "`<`"]))?;
        Ok(match name.as_str() {
            "CharacterString" => ValueType::CharacterString,
            "Real" => ValueType::Real,
            "Integer" => ValueType::Integer,
            _ => ValueType::ObjectRef(name),
        })
    }

    fn function_def(&mut self) -> Result<DslFunction> {
        let name = self.ident()?;
        self.expect(&Token::LParen)?;
        let param = self.ident()?;
        let param_type = self.ident()?;
        self.expect(&Token::RParen)?;
        self.expect_kw(Keyword::As)?;
        self.expect_kw(Keyword::Begin)?;
        let mut body = Vec::new();
        loop {
            while self.eat(&Token::Semi) {}
            if self.eat_kw(Keyword::End) {
                break;
            }
            if !self.at_kw(Keyword::Set) {
                return Err(self.error(&["`set`", "`end`"]));
            }
            self.bump();
            match self.set()? {
                Statement::Set(s) => body.push(s),
                _ => return Err(self.error(&["`set` of a stored function"])),
            }
            if !self.at_kw(Keyword::End) {
                self.expect(&Token::Semi)?;
            }
        }
        Ok(DslFunction { name, param, param_type, body })
    }

    fn trigger_def(&mut self) -> Result<TriggerSpec> {
        self.expect_word("on")?;
        let watched = self.ident()?;
        let projection = self.ident_list()?;
        self.expect_word("evaluate")?;
        let net = self.expr()?;
        self.expect_kw(Keyword::Into)?;
        let target = self.ident()?;
        let fields = self.ident_list()?;
        let back_ref = if self.eat_word("ref") { Some(self.ident()?) } else { None };
        Ok(TriggerSpec { watched, projection, net, target, fields, back_ref })
    }

    fn set(&mut self) -> Result<Statement> {
        let function = self.ident()?;
        self.expect(&Token::LParen)?;
        let target = self.expr()?;
        self.expect(&Token::RParen)?;
        if !(self.eat(&Token::Eq) || self.eat(&Token::Arrow)) {
            return Err(self.error(&["`=`", "`->`"]));
        }
        let value = self.expr()?;
        let each = if self.at_kw(Keyword::For) {
            let bindings = self.for_each()?;
            let filter = if self.eat_kw(Keyword::Where) { self.conditions()? } else { Vec::new() };
            Some(ForEach { bindings, filter })
        } else {
            None
        };
        if function == "Predecessor" && each.is_none() {
            // `Set Predecessor(A) = (B, C)` wires A into B and C.
            let to = match value {
                Expr::Tuple(items) => items,
                single => vec![single],
            };
            return Ok(Statement::Connect { from: target, to, weight: None });
        }
        Ok(Statement::Set(SetStmt { function, target, value, each }))
    }

    fn for_each(&mut self) -> Result<Vec<Binding>> {
        self.expect_kw(Keyword::For)?;
        self.expect_kw(Keyword::Each)?;
        let mut bindings = Vec::new();
        loop {
            let type_name = self.ident()?;
            let var = self.ident()?;
            bindings.push(Binding { type_name, var });
            if !(self.at(&Token::Comma)
                && matches!(self.peek_at(1), Token::Ident(_))
                && matches!(self.peek_at(2), Token::Ident(_)))
            {
                break;
            }
            self.bump();
        }
        Ok(bindings)
    }

    fn select(&mut self) -> Result<SelectExpr> {
        self.expect_kw(Keyword::Select)?;
        let mut projection = vec![self.expr()?];
        while self.eat(&Token::Comma) {
            projection.push(self.expr()?);
        }
        let source = if self.at_kw(Keyword::For) {
            Source::ForEach(self.for_each()?)
        } else if self.eat_kw(Keyword::From) {
            let type_name = self.ident()?;
            let alias = if let Token::Ident(_) = self.peek() { Some(self.ident()?) } else { None };
            Source::From { type_name, alias }
        } else {
            Source::None
        };
        let filter = if self.eat_kw(Keyword::Where) { self.conditions()? } else { Vec::new() };
        Ok(SelectExpr { projection, source, filter })
    }

    fn conditions(&mut self) -> Result<Vec<Condition>> {
        let mut out = vec![self.condition()?];
        while self.eat_kw(Keyword::And) {
            out.push(self.condition()?);
        }
        Ok(out)
    }

    fn condition(&mut self) -> Result<Condition> {
        let lhs = self.expr()?;
        if self.eat_kw(Keyword::In) {
            let set = self.primary()?;
            return Ok(Condition::In { item: lhs, set });
        }
        let op = match self.peek() {
            Token::Eq => CompareOp::Eq,
            Token::Ne => CompareOp::Ne,
            Token::Lt => CompareOp::Lt,
            Token::Le => CompareOp::Le,
            Token::Gt => CompareOp::Gt,
            Token::Ge => CompareOp::Ge,
            _ => return Err(self.error(&["`=`", "`<>`", "`<`", "`<=`", "`>`", "`>=`", "`in`"])),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Condition::Compare { op, lhs, rhs })
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect(&Token::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Token::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(&Token::RParen) {
                return Ok(out);
            }
            if !self.eat(&Token::Comma) {
                return Err(self.error(&["`,`", "`)`"]));
            }
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&Token::Minus) {
            return Ok(match self.peek().clone() {
                Token::Integer(n) => {
                    self.bump();
                    Expr::Literal(Literal::Integer(-n))
                }
                Token::Real(x) => {
                    self.bump();
                    Expr::Literal(Literal::Real(-x))
                }
                _ => Expr::Neg(Box::new(self.unary()?)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Token::Integer(n) => {
                self.bump();
                Ok(Expr::Literal(Literal::Integer(n)))
            }
            Token::Real(x) => {
                self.bump();
                Ok(Expr::Literal(Literal::Real(x)))
            }
            Token::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Literal::Text(s)))
            }
            Token::Keyword(Keyword::Null) => {
                self.bump();
                Ok(Expr::Literal(Literal::Null))
            }
            Token::Keyword(Keyword::Select) => Ok(Expr::Select(Box::new(self.select()?))),
            Token::Ident(name) => {
                self.bump();
                if !self.at(&Token::LParen) {
                    return Ok(Expr::Ident(name));
                }
                if self.peek_at(1) == &Token::Keyword(Keyword::Hull) {
                    self.bump();
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(&Token::RParen)?;
                    return Ok(Expr::Hull { function: name, arg: Box::new(arg) });
                }
                Ok(Expr::Apply { function: name, args: self.args()? })
            }
            Token::LParen => {
                self.bump();
                if self.eat(&Token::RParen) {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                if self.at_kw(Keyword::Select) {
                    let sel = self.select()?;
                    self.expect(&Token::RParen)?;
                    return Ok(Expr::Select(Box::new(sel)));
                }
                let first = self.expr()?;
                if self.eat(&Token::RParen) {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat(&Token::Comma) {
                    if self.at(&Token::RParen) {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect(&Token::RParen)?;
                Ok(Expr::Tuple(items))
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_type_statement() {
        let stmts = parse_script("Create type NUnit (Name CharacterString);").unwrap();
        assert_eq!(
            stmts,
            vec![Statement::CreateType {
                name: "NUnit".into(),
                supertypes: vec![],
                functions: vec![FunctionDecl {
                    name: "Name".into(),
                    value_type: ValueType::CharacterString,
                    multivalued: false
                }],
            }]
        );
        assert!(parse_script("").unwrap().is_empty());
        assert!(parse_script("  -- only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn learn_statement() {
        assert_eq!(
            parse_script("Learn XOR-Net repeat 3000;").unwrap(),
            vec![Statement::Learn { net: Expr::ident("XOR-Net"), repeat: 3000 }]
        );
        assert_eq!(parse_statement("learn N;").unwrap(), Statement::Learn { net: Expr::ident("N"), repeat: 1 });
    }

    #[test]
    fn precedence_and_negation() {
        let e = parse_expr("1 + 2 * 3").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Add,
                Expr::Literal(Literal::Integer(1)),
                Expr::binary(BinOp::Mul, Expr::Literal(Literal::Integer(2)), Expr::Literal(Literal::Integer(3)))
            )
        );
        assert_eq!(
            parse_expr("pow(1 + exp(-Activation(U)), -1)").unwrap(),
            Expr::apply(
                "pow",
                vec![
                    Expr::binary(
                        BinOp::Add,
                        Expr::Literal(Literal::Integer(1)),
                        Expr::apply(
                            "exp",
                            vec![Expr::Neg(Box::new(Expr::apply("Activation", vec![Expr::ident("U")])))]
                        )
                    ),
                    Expr::Literal(Literal::Integer(-1)),
                ]
            )
        );
    }

    #[test]
    fn hull_and_tuples() {
        assert_eq!(
            parse_expr("LearnRate (Hull U)").unwrap(),
            Expr::Hull { function: "LearnRate".into(), arg: Box::new(Expr::ident("U")) }
        );
        assert_eq!(
            parse_expr("((Input, 1), (Hidden, 2))").unwrap(),
            Expr::Tuple(vec![
                Expr::Tuple(vec![Expr::ident("Input"), Expr::Literal(Literal::Integer(1))]),
                Expr::Tuple(vec![Expr::ident("Hidden"), Expr::Literal(Literal::Integer(2))]),
            ])
        );
        assert_eq!(parse_expr("(x)").unwrap(), Expr::ident("x"));
        assert_eq!(parse_expr("(x,)").unwrap(), Expr::Tuple(vec![Expr::ident("x")]));
    }

    #[test]
    fn predecessor_set_becomes_connect() {
        assert_eq!(
            parse_statement("Set Predecessor(Input) = (Hidden, Output);").unwrap(),
            Statement::Connect {
                from: Expr::ident("Input"),
                to: vec![Expr::ident("Hidden"), Expr::ident("Output")],
                weight: None
            }
        );
        assert_eq!(
            parse_statement("Set Predecessor(Hidden) = Output;").unwrap(),
            Statement::Connect { from: Expr::ident("Hidden"), to: vec![Expr::ident("Output")], weight: None }
        );
    }

    #[test]
    fn arrow_is_a_synonym_for_equals() {
        let a = parse_statement("Set UpdateOrder(Input) -> ((Input1, 1), (Input2, 2));").unwrap();
        let b = parse_statement("Set UpdateOrder(Input) = ((Input1, 1), (Input2, 2));").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn create_instance_forms() {
        let s = parse_statement("Create IElement (Order) instance Input1(1), Input2(2);").unwrap();
        let Statement::CreateInstance { type_name, functions, instances } = s else { panic!() };
        assert_eq!(type_name, "IElement");
        assert_eq!(functions, vec!["Order".to_string()]);
        assert_eq!(instances.len(), 2);
        assert_eq!(instances[1].name.as_deref(), Some("Input2"));
        let s = parse_statement("Create PElement () instance Hidden;").unwrap();
        assert!(matches!(s, Statement::CreateInstance { ref instances, .. } if instances[0].args.is_empty()));
        let s = parse_statement("Create testdata (x, y) instance (0, 1);").unwrap();
        assert!(matches!(s, Statement::CreateInstance { ref instances, .. } if instances[0].name.is_none()));
    }

    #[test]
    fn subtype_without_type_keyword() {
        let s = parse_statement("Create IElement subtype of PElement (Order Integer);").unwrap();
        assert!(matches!(s, Statement::CreateType { ref supertypes, .. } if supertypes == &["PElement"]));
    }

    #[test]
    fn syntax_errors_report_position_and_expectations() {
        let err = parse_script("Create type NUnit (Name CharacterString);\nbogus;").unwrap_err();
        match err {
            Error::Syntax { position, expected, at_eof, .. } => {
                assert_eq!(position, Position { line: 2, column: 1 });
                assert!(expected.iter().any(|e| e.contains("create")));
                assert!(!at_eof);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_script("Set Name(x) = ").unwrap_err().is_incomplete_input());
        assert!(parse_script("Learn X repeat 3").unwrap_err().is_incomplete_input());
    }

    #[test]
    fn function_definition() {
        let src = "Create function Ident(U NUnit) as\nbegin\n  Set Activation(U) = Activation(U);\nend;";
        let s = parse_statement(src).unwrap();
        let Statement::CreateFunction(f) = &s else { panic!() };
        assert_eq!(f.param, "U");
        assert_eq!(f.param_type, "NUnit");
        assert_eq!(f.body.len(), 1);
        assert_eq!(parse_statement(&format!("{s};")).unwrap(), s);
    }
}
