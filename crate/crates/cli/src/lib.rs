//! Script runner and interactive shell over an embedded [`neurodb::Database`].

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use neurodb::osql::parse_script_spanned;
use neurodb::{Database, Error, LearnMode, Outcome, Settings, Value};

pub use neurodb::import::import_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCRIPT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Snapshot file loaded at start (when present) and written on success.
    pub db_path: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub mode: LearnMode,
    pub report_interval: u64,
    pub exit_on_error: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            db_path: None,
            script: None,
            mode: LearnMode::Paper,
            report_interval: 100,
            exit_on_error: false,
        }
    }
}

impl SessionConfig {
    pub fn open(&self) -> Result<Database, Error> {
        let db = match &self.db_path {
            Some(p) if p.exists() => Database::load(p)?,
            _ => Database::new(),
        };
        Ok(db.with_settings(Settings { mode: self.mode, report_interval: self.report_interval }))
    }

    fn persist(&self, db: &Database) -> Result<(), Error> {
        match &self.db_path {
            Some(p) => db.save(p),
            None => Ok(()),
        }
    }
}

/// An error tagged with the source line of the statement that raised it.
#[derive(Debug)]
pub struct LineError {
    pub line: usize,
    pub error: Error,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.error {
            // Syntax errors carry their own position.
            Error::Syntax { .. } => write!(f, "{}", self.error),
            e => write!(f, "line {}: {e}", self.line),
        }
    }
}

/// Bags print one element per line; everything else uses its display form.
fn print_outcome(out: &mut dyn Write, outcome: &Outcome) -> io::Result<()> {
    if let Outcome::Value(Value::Bag(items)) = outcome {
        for v in items {
            writeln!(out, "{v}")?;
        }
        return Ok(());
    }
    let text = outcome.to_string();
    if !text.is_empty() {
        writeln!(out, "{text}")?;
    }
    Ok(())
}

/// Executes `src` statement by statement, printing each result. Lines are
/// counted from `first_line`. Stops at the first error.
pub fn run_source(db: &mut Database, src: &str, first_line: usize, out: &mut dyn Write) -> Result<(), LineError> {
    let offset = first_line.saturating_sub(1);
    let stmts = parse_script_spanned(src).map_err(|error| {
        let line = match &error {
            Error::Syntax { position, .. } => position.line + offset,
            _ => first_line,
        };
        LineError { line, error }
    })?;
    for (stmt, pos) in stmts {
        let line = pos.line + offset;
        let outcome = db.exec_statement(&stmt).map_err(|error| LineError { line, error })?;
        print_outcome(out, &outcome).map_err(|e| LineError { line, error: e.into() })?;
    }
    Ok(())
}

/// Runs a script file; relative paths inside it resolve against the
/// script's directory. Returns the process exit code.
pub fn run_script(path: &Path, config: &SessionConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {}", path.display(), Error::from(e));
            return EXIT_SCRIPT_ERROR;
        }
    };
    let mut db = match config.open() {
        Ok(db) => db,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCRIPT_ERROR;
        }
    };
    if let Some(dir) = path.parent() {
        db.set_base_dir(if dir.as_os_str().is_empty() { Path::new(".") } else { dir });
    }
    finish(run_source(&mut db, &src, 1, out).map(|_| db), config, path.display(), err)
}

/// Runs `src` against the configured database (for `--eval`).
pub fn run_eval(src: &str, config: &SessionConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = config.open().map_err(|error| LineError { line: 1, error }).and_then(|mut db| {
        if let Some(script) = &config.script {
            let text = std::fs::read_to_string(script).map_err(|e| LineError { line: 1, error: e.into() })?;
            if let Some(dir) = script.parent().filter(|d| !d.as_os_str().is_empty()) {
                db.set_base_dir(dir);
            }
            run_source(&mut db, &text, 1, out)?;
        }
        run_source(&mut db, src, 1, out).map(|_| db)
    });
    finish(result, config, "--eval", err)
}

fn finish(
    result: Result<Database, LineError>,
    config: &SessionConfig,
    origin: impl std::fmt::Display,
    err: &mut dyn Write,
) -> i32 {
    match result.and_then(|db| config.persist(&db).map_err(|error| LineError { line: 0, error })) {
        Ok(()) => EXIT_OK,
        Err(e) if e.line == 0 => {
            let _ = writeln!(err, "error: {}", e.error);
            EXIT_SCRIPT_ERROR
        }
        Err(e) => {
            let _ = writeln!(err, "error: {origin}: {e}");
            EXIT_SCRIPT_ERROR
        }
    }
}

/// Interactive loop. A statement may span lines and runs once its `;` is
/// read. Errors are reported and the session continues unless
/// `exit_on_error` is set.
pub fn repl(config: &SessionConfig, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut db = match config.open() {
        Ok(db) => db,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCRIPT_ERROR;
        }
    };
    let mut buffer = String::new();
    let mut first_line = 1;
    let mut line_no = 0;
    let mut code = EXIT_OK;
    loop {
        let prompt = if buffer.trim().is_empty() { "neurodb> " } else { "    ...> " };
        let _ = write!(out, "{prompt}");
        let _ = out.flush();
        let mut line = String::new();
        match input.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_SCRIPT_ERROR;
            }
        }
        line_no += 1;
        if buffer.trim().is_empty() {
            buffer.clear();
            first_line = line_no;
        }
        buffer.push_str(&line);
        if buffer.trim().is_empty() {
            continue;
        }
        match parse_script_spanned(&buffer) {
            Err(e) if e.is_incomplete_input() => continue,
            _ => {}
        }
        let result = run_source(&mut db, &buffer, first_line, out);
        buffer.clear();
        if let Err(e) = result {
            let _ = writeln!(err, "error: {e}");
            if config.exit_on_error {
                code = EXIT_SCRIPT_ERROR;
                break;
            }
        }
    }
    let _ = writeln!(out);
    if !buffer.trim().is_empty() {
        let _ = writeln!(err, "error: line {first_line}: incomplete statement at end of input");
        if config.exit_on_error {
            code = EXIT_SCRIPT_ERROR;
        }
    }
    if let Err(e) = config.persist(&db) {
        let _ = writeln!(err, "error: {e}");
        code = EXIT_SCRIPT_ERROR;
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_are_offset_from_the_first_line() {
        let mut db = Database::new();
        let mut out = Vec::new();
        let e = run_source(&mut db, "Select 1;\n\nSelect Missing;", 10, &mut out).unwrap_err();
        assert_eq!(e.line, 12);
        assert_eq!(e.to_string(), "line 12: unknown identifier `Missing`");
        assert_eq!(out, b"1\n");
    }

    #[test]
    fn syntax_errors_keep_their_own_position() {
        let e = run_source(&mut Database::new(), "Select 1 +;", 1, &mut Vec::new()).unwrap_err();
        assert!(e.to_string().starts_with("syntax error at line 1, column 11"), "{e}");
    }
}
