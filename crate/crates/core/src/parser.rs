//! Screenplay structure recovery from plain-text scripts.
//!
//! Raw lines are classified one at a time from their formatting cues
//! (capitalization and indentation, with the previous line as context),
//! then grouped into scenes. Consecutive lines of the same kind form one
//! statement, so a wrapped action paragraph or a multi-line speech is a
//! single statement. Slug lines, parentheticals, transitions and
//! character cues are structural only and never appear as statements.
//!
//! The tabular form (`Title`, `Line`, `Scene`, `Type`, `Character`,
//! `Text`) is the interchange format; [`to_table`] and [`parse_table`]
//! round-trip byte-exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TABLE_HEADER: &str = "Title\tLine\tScene\tType\tCharacter\tText";

/// Default cap on statements per scene.
pub const DEFAULT_SCENE_CAP: usize = 60;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParserConfig {
    pub heading_prefixes: Vec<String>,
    /// Minimum leading columns (after tab expansion) for a character cue.
    pub cue_indent: usize,
    /// Minimum leading columns for a dialogue body or parenthetical.
    pub dialogue_indent: usize,
    pub tab_width: usize,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            heading_prefixes: vec!["INT.".into(), "EXT.".into(), "INT/EXT".into()],
            cue_indent: 10,
            dialogue_indent: 4,
            tab_width: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatementKind {
    SceneHeading,
    Action,
    Dialogue,
    Parenthetical,
    Transition,
    /// A speaker line such as `VINCENT (V.O.)`; opens a dialogue block.
    CharacterCue,
    Blank,
    Other,
}

impl StatementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatementKind::SceneHeading => "scene_heading",
            StatementKind::Action => "action",
            StatementKind::Dialogue => "dialogue",
            StatementKind::Parenthetical => "parenthetical",
            StatementKind::Transition => "transition",
            StatementKind::CharacterCue => "character_cue",
            StatementKind::Blank => "blank",
            StatementKind::Other => "other",
        }
    }
}

/// Result of classifying one raw line.
///
/// `character` is the active speaker: the cue name for a
/// [`StatementKind::CharacterCue`], the inherited name for dialogue and
/// parentheticals, and `None` everywhere else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineClass {
    pub kind: StatementKind,
    pub character: Option<String>,
}

impl LineClass {
    fn plain(kind: StatementKind) -> Self {
        Self {
            kind,
            character: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawScript {
    pub title: String,
    pub lines: Vec<String>,
}

impl RawScript {
    pub fn from_text(title: impl Into<String>, text: &str) -> Self {
        Self {
            title: title.into(),
            lines: text.lines().map(str::to_owned).collect(),
        }
    }
}

/// One classified source line.
///
/// `scene_no` is 0 for preamble lines that precede the first scene
/// heading (title pages, `FADE IN:`); those never reach a [`Scene`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub line_no: usize,
    pub scene_no: usize,
    pub kind: StatementKind,
    pub character: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    Action(String),
    Dialogue { character: String, text: String },
}

impl Statement {
    pub fn text(&self) -> &str {
        match self {
            Statement::Action(t) => t,
            Statement::Dialogue { text, .. } => text,
        }
    }

    pub fn is_dialogue(&self) -> bool {
        matches!(self, Statement::Dialogue { .. })
    }
}

/// A scene: its slug line plus the interleaved action/dialogue statements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub index: usize,
    pub heading: Option<String>,
    pub statements: Vec<Statement>,
}

impl Scene {
    pub fn action_statements(&self) -> impl Iterator<Item = &str> + '_ {
        self.statements.iter().filter_map(|s| match s {
            Statement::Action(t) => Some(t.as_str()),
            Statement::Dialogue { .. } => None,
        })
    }

    pub fn dialogue_statements(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.statements.iter().filter_map(|s| match s {
            Statement::Dialogue { character, text } => Some((character.as_str(), text.as_str())),
            Statement::Action(_) => None,
        })
    }

    /// Speakers with at least one dialogue statement in this scene.
    pub fn characters(&self) -> BTreeSet<String> {
        self.dialogue_statements()
            .map(|(c, _)| c.to_owned())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screenplay {
    pub title: String,
    pub scenes: Vec<Scene>,
}

impl Screenplay {
    pub fn statement_count(&self) -> usize {
        self.scenes.iter().map(Scene::len).sum()
    }

    pub fn action_count(&self) -> usize {
        self.scenes.iter().map(|s| s.action_statements().count()).sum()
    }

    pub fn dialogue_count(&self) -> usize {
        self.scenes.iter().map(|s| s.dialogue_statements().count()).sum()
    }
}

/// Per-script parse diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub title: String,
    pub lines: usize,
    pub counts: BTreeMap<String, usize>,
    pub headings: usize,
    pub scenes: usize,
    pub action_statements: usize,
    pub dialogue_statements: usize,
    /// Fraction of non-blank lines that received a structural kind other
    /// than `other`.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct ParsedScript {
    pub lines: Vec<ScriptLine>,
    pub screenplay: Screenplay,
    pub report: QualityReport,
}

fn expand_indent(raw: &str, tab_width: usize) -> usize {
    let mut col = 0;
    for ch in raw.chars() {
        match ch {
            ' ' => col += 1,
            '\t' => col += tab_width - (col % tab_width),
            _ => break,
        }
    }
    col
}

fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_all_caps(s: &str) -> bool {
    s.chars().any(char::is_alphabetic) && !s.chars().any(char::is_lowercase)
}

/// Strip `(V.O.)`, `(O.S.)`, `(CONT'D)` and any other parenthesized
/// suffix from a character cue.
pub fn normalize_character(cue: &str) -> String {
    let mut out = String::with_capacity(cue.len());
    let mut depth = 0usize;
    for ch in cue.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(ch),
            _ => {}
        }
    }
    normalize_text(&out)
}

fn is_transition(trimmed: &str) -> bool {
    is_all_caps(trimmed)
        && (trimmed.ends_with("TO:")
            || trimmed.starts_with("FADE ")
            || trimmed == "FADE IN:"
            || trimmed.ends_with("FADE OUT.")
            || trimmed == "THE END")
}

/// Classify one raw line given the classification of the line above it.
pub fn classify_line(raw: &str, prev: Option<&LineClass>, cfg: &ParserConfig) -> LineClass {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return LineClass::plain(StatementKind::Blank);
    }
    if !trimmed.chars().any(char::is_alphanumeric) {
        return LineClass::plain(StatementKind::Other);
    }
    if is_all_caps(trimmed)
        && cfg
            .heading_prefixes
            .iter()
            .any(|p| trimmed.starts_with(p.as_str()))
    {
        return LineClass::plain(StatementKind::SceneHeading);
    }
    if is_transition(trimmed) {
        return LineClass::plain(StatementKind::Transition);
    }

    let indent = expand_indent(raw, cfg.tab_width);
    let speaker = prev.and_then(|p| match p.kind {
        StatementKind::CharacterCue | StatementKind::Dialogue | StatementKind::Parenthetical => {
            p.character.clone()
        }
        _ => None,
    });

    if indent >= cfg.dialogue_indent && speaker.is_some() && trimmed.starts_with('(') {
        return LineClass {
            kind: StatementKind::Parenthetical,
            character: speaker,
        };
    }
    if indent >= cfg.cue_indent && is_all_caps(trimmed) && !trimmed.starts_with('(') {
        let name = normalize_character(trimmed);
        if !name.is_empty() && name.chars().any(char::is_alphabetic) {
            return LineClass {
                kind: StatementKind::CharacterCue,
                character: Some(name),
            };
        }
    }
    if indent >= cfg.dialogue_indent && speaker.is_some() {
        return LineClass {
            kind: StatementKind::Dialogue,
            character: speaker,
        };
    }
    if !trimmed.chars().any(char::is_alphabetic) {
        // page numbers, stray digits
        return LineClass::plain(StatementKind::Other);
    }
    LineClass::plain(StatementKind::Action)
}

/// Classify every line of a script, assigning scene numbers.
pub fn classify_script(raw: &RawScript, cfg: &ParserConfig) -> Vec<ScriptLine> {
    let mut prev: Option<LineClass> = None;
    let has_heading = raw.lines.iter().any(|l| {
        let t = l.trim();
        is_all_caps(t) && cfg.heading_prefixes.iter().any(|p| t.starts_with(p.as_str()))
    });
    let mut scene_no = if has_heading { 0 } else { 1 };
    let mut out = Vec::with_capacity(raw.lines.len());
    for (i, line) in raw.lines.iter().enumerate() {
        let class = classify_line(line, prev.as_ref(), cfg);
        if class.kind == StatementKind::SceneHeading {
            scene_no += 1;
        }
        let text = match class.kind {
            StatementKind::CharacterCue => class.character.clone().unwrap_or_default(),
            _ => normalize_text(line),
        };
        out.push(ScriptLine {
            line_no: i + 1,
            scene_no,
            kind: class.kind,
            character: if class.kind == StatementKind::Dialogue {
                class.character.clone()
            } else {
                None
            },
            text,
        });
        prev = Some(class);
    }
    out
}

/// Group classified lines into scenes.
///
/// With no scene heading at all, the whole script becomes one scene.
pub fn segment_scenes(title: &str, lines: &[ScriptLine]) -> Result<Screenplay> {
    if lines.iter().all(|l| l.kind == StatementKind::Blank) {
        return Err(Error::EmptyScript);
    }
    let has_heading = lines.iter().any(|l| l.kind == StatementKind::SceneHeading);
    let mut scenes: Vec<Scene> = Vec::new();
    if !has_heading {
        scenes.push(Scene {
            index: 1,
            heading: None,
            statements: Vec::new(),
        });
    }
    // Continuation of the previous statement: same kind, same speaker,
    // no blank/structural line in between.
    let mut open: Option<(StatementKind, Option<String>)> = None;
    for line in lines {
        match line.kind {
            StatementKind::SceneHeading => {
                scenes.push(Scene {
                    index: scenes.len() + 1,
                    heading: Some(line.text.clone()),
                    statements: Vec::new(),
                });
                open = None;
            }
            StatementKind::Action | StatementKind::Dialogue if line.scene_no > 0 => {
                let Some(scene) = scenes.last_mut() else {
                    continue;
                };
                let key = (line.kind, line.character.clone());
                let continues = open.as_ref() == Some(&key);
                if continues {
                    if let Some(last) = scene.statements.last_mut() {
                        match last {
                            Statement::Action(t) | Statement::Dialogue { text: t, .. } => {
                                t.push(' ');
                                t.push_str(&line.text);
                            }
                        }
                    }
                } else {
                    scene.statements.push(match line.kind {
                        StatementKind::Dialogue => Statement::Dialogue {
                            character: line.character.clone().unwrap_or_default(),
                            text: line.text.clone(),
                        },
                        _ => Statement::Action(line.text.clone()),
                    });
                    open = Some(key);
                }
            }
            // A parenthetical inside a speech does not end it.
            StatementKind::Parenthetical => {}
            StatementKind::CharacterCue => {
                open = None;
            }
            _ => open = None,
        }
    }
    Ok(Screenplay {
        title: title.to_owned(),
        scenes,
    })
}

/// Split scenes longer than `cap` statements into consecutive pieces,
/// greedily filled to `cap`.
pub fn split_long_scenes(sp: &Screenplay, cap: usize) -> Screenplay {
    let cap = cap.max(1);
    let mut scenes = Vec::with_capacity(sp.scenes.len());
    for scene in &sp.scenes {
        if scene.statements.len() <= cap {
            scenes.push(Scene {
                index: scenes.len() + 1,
                heading: scene.heading.clone(),
                statements: scene.statements.clone(),
            });
            continue;
        }
        for chunk in scene.statements.chunks(cap) {
            scenes.push(Scene {
                index: scenes.len() + 1,
                heading: scene.heading.clone(),
                statements: chunk.to_vec(),
            });
        }
    }
    Screenplay {
        title: sp.title.clone(),
        scenes,
    }
}

fn quality_report(title: &str, lines: &[ScriptLine], sp: &Screenplay) -> QualityReport {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in lines {
        *counts.entry(l.kind.as_str().to_owned()).or_default() += 1;
    }
    let non_blank = lines
        .iter()
        .filter(|l| l.kind != StatementKind::Blank)
        .count();
    let other = counts.get("other").copied().unwrap_or(0);
    QualityReport {
        title: title.to_owned(),
        lines: lines.len(),
        headings: counts.get("scene_heading").copied().unwrap_or(0),
        counts,
        scenes: sp.scenes.len(),
        action_statements: sp.action_count(),
        dialogue_statements: sp.dialogue_count(),
        score: if non_blank == 0 {
            0.0
        } else {
            1.0 - other as f64 / non_blank as f64
        },
    }
}

/// Classify, segment and build the quality report for one script.
/// Scene capping is left to the caller.
pub fn parse_script(raw: &RawScript, cfg: &ParserConfig) -> Result<ParsedScript> {
    let lines = classify_script(raw, cfg);
    let screenplay = segment_scenes(&raw.title, &lines)?;
    let report = quality_report(&raw.title, &lines, &screenplay);
    Ok(ParsedScript {
        lines,
        screenplay,
        report,
    })
}

pub fn parse_text(title: &str, text: &str, cfg: &ParserConfig) -> Result<ParsedScript> {
    parse_script(&RawScript::from_text(title, text), cfg)
}

/// Row type in the tabular form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowType {
    Scene,
    Action,
    Dialogue,
}

impl fmt::Display for RowType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowType::Scene => "Scene",
            RowType::Action => "Action",
            RowType::Dialogue => "Dial.",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub title: String,
    pub line: usize,
    pub scene: usize,
    pub row_type: RowType,
    pub character: String,
    pub text: String,
}

fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Rows in table order: one `Scene` row per scene followed by its
/// statements. `line` counts rows from 1.
pub fn table_rows(sp: &Screenplay) -> Vec<TableRow> {
    let title = clean_field(&sp.title);
    let mut rows = Vec::with_capacity(sp.scenes.len() + sp.statement_count());
    for scene in &sp.scenes {
        rows.push(TableRow {
            title: title.clone(),
            line: rows.len() + 1,
            scene: scene.index,
            row_type: RowType::Scene,
            character: String::new(),
            text: clean_field(scene.heading.as_deref().unwrap_or("")),
        });
        for st in &scene.statements {
            let (row_type, character, text) = match st {
                Statement::Action(t) => (RowType::Action, String::new(), t.as_str()),
                Statement::Dialogue { character, text } => {
                    (RowType::Dialogue, clean_field(character), text.as_str())
                }
            };
            rows.push(TableRow {
                title: title.clone(),
                line: rows.len() + 1,
                scene: scene.index,
                row_type,
                character,
                text: clean_field(text),
            });
        }
    }
    rows
}

/// Render the screenplay as TSV with a header row; every row is
/// newline-terminated.
pub fn to_table(sp: &Screenplay) -> String {
    let mut out = String::new();
    out.push_str(TABLE_HEADER);
    out.push('\n');
    for r in table_rows(sp) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.title, r.line, r.scene, r.row_type, r.character, r.text
        ));
    }
    out
}

/// Inverse of [`to_table`].
pub fn parse_table(tsv: &str) -> Result<Screenplay> {
    let bad = |line: usize, message: String| Error::Parse {
        source_name: "table".into(),
        line,
        message,
    };
    let mut lines = tsv.lines();
    match lines.next() {
        Some(h) if h == TABLE_HEADER => {}
        _ => return Err(bad(1, "missing header".into())),
    }
    let mut title: Option<String> = None;
    let mut scenes: Vec<Scene> = Vec::new();
    for (i, line) in lines.enumerate() {
        let ln = i + 2;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(bad(ln, format!("expected 6 fields, found {}", fields.len())));
        }
        if title.is_none() {
            title = Some(fields[0].to_owned());
        }
        let scene_no: usize = fields[2]
            .parse()
            .map_err(|e| bad(ln, format!("scene: {e}")))?;
        match fields[3] {
            "Scene" => {
                if scene_no != scenes.len() + 1 {
                    return Err(bad(ln, format!("non-contiguous scene {scene_no}")));
                }
                scenes.push(Scene {
                    index: scene_no,
                    heading: (!fields[5].is_empty()).then(|| fields[5].to_owned()),
                    statements: Vec::new(),
                });
            }
            kind @ ("Action" | "Dial.") => {
                let scene = scenes
                    .last_mut()
                    .filter(|s| s.index == scene_no)
                    .ok_or_else(|| bad(ln, "statement outside its scene".into()))?;
                scene.statements.push(if kind == "Action" {
                    Statement::Action(fields[5].to_owned())
                } else {
                    Statement::Dialogue {
                        character: fields[4].to_owned(),
                        text: fields[5].to_owned(),
                    }
                });
            }
            other => return Err(bad(ln, format!("unknown row type {other:?}"))),
        }
    }
    if scenes.is_empty() {
        return Err(Error::EmptyScript);
    }
    Ok(Screenplay {
        title: title.unwrap_or_default(),
        scenes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ParserConfig {
        ParserConfig::default()
    }

    #[test]
    fn heading_is_detected() {
        let c = classify_line("EXT. APARTMENT COURTYARD - MORNING", None, &cfg());
        assert_eq!(c.kind, StatementKind::SceneHeading);
    }

    #[test]
    fn cue_then_indented_body_is_dialogue() {
        let cue = classify_line("                    VINCENT", None, &cfg());
        assert_eq!(cue.kind, StatementKind::CharacterCue);
        let body = classify_line("          What's her name?", Some(&cue), &cfg());
        assert_eq!(body.kind, StatementKind::Dialogue);
        assert_eq!(body.character.as_deref(), Some("VINCENT"));
    }

    #[test]
    fn unindented_line_is_action() {
        let c = classify_line("Vincent and Jules.", None, &cfg());
        assert_eq!(c.kind, StatementKind::Action);
        assert_eq!(c.character, None);
    }

    #[test]
    fn voice_over_marker_is_stripped() {
        let c = classify_line("\t\t\tJULES (V.O.)", None, &cfg());
        assert_eq!(c.kind, StatementKind::CharacterCue);
        assert_eq!(c.character.as_deref(), Some("JULES"));
        assert_eq!(normalize_character("MIA (O.S.) (CONT'D)"), "MIA");
    }

    #[test]
    fn parenthetical_inside_speech() {
        let cue = classify_line("                    JULES", None, &cfg());
        let p = classify_line("               (beat)", Some(&cue), &cfg());
        assert_eq!(p.kind, StatementKind::Parenthetical);
        let body = classify_line("          Mia.", Some(&p), &cfg());
        assert_eq!(body.kind, StatementKind::Dialogue);
        assert_eq!(body.character.as_deref(), Some("JULES"));
    }

    #[test]
    fn indented_line_after_blank_is_not_dialogue() {
        let cue = classify_line("                    JULES", None, &cfg());
        let body = classify_line("          Mia.", Some(&cue), &cfg());
        let blank = classify_line("", Some(&body), &cfg());
        let next = classify_line("     He walks away.", Some(&blank), &cfg());
        assert_eq!(next.kind, StatementKind::Action);
    }

    #[test]
    fn odd_lines_are_other_or_transition() {
        assert_eq!(classify_line("   ---   ", None, &cfg()).kind, StatementKind::Other);
        assert_eq!(classify_line("  42.", None, &cfg()).kind, StatementKind::Other);
        assert_eq!(
            classify_line("                                   CUT TO:", None, &cfg()).kind,
            StatementKind::Transition
        );
    }

    #[test]
    fn tabs_expand_to_eight_columns() {
        assert_eq!(expand_indent("\tX", 8), 8);
        assert_eq!(expand_indent("  \tX", 8), 8);
        assert_eq!(expand_indent("\t  X", 8), 10);
    }

    #[test]
    fn no_headings_gives_single_scene() {
        let text = "One.\n\nTwo.\n\nThree.\n\nFour.\n\nFive.\n";
        let p = parse_text("t", text, &cfg()).unwrap();
        assert_eq!(p.screenplay.scenes.len(), 1);
        assert_eq!(p.screenplay.scenes[0].action_statements().count(), 5);
    }

    #[test]
    fn adjacent_headings_keep_empty_scene() {
        let text = "INT. A - DAY\nEXT. B - NIGHT\n\nSomething happens.\n";
        let p = parse_text("t", text, &cfg()).unwrap();
        assert_eq!(p.screenplay.scenes.len(), 2);
        assert!(p.screenplay.scenes[0].is_empty());
        assert_eq!(p.screenplay.scenes[1].len(), 1);
    }

    #[test]
    fn blank_script_is_rejected() {
        assert!(matches!(
            parse_text("t", "\n   \n", &cfg()),
            Err(Error::EmptyScript)
        ));
    }

    #[test]
    fn wrapped_lines_merge_into_one_statement() {
        let text = "INT. ROOM - DAY\n\nA long action line\nthat wraps here.\n\n                    BOB\n          First half\n          second half.\n";
        let p = parse_text("t", text, &cfg()).unwrap();
        let scene = &p.screenplay.scenes[0];
        assert_eq!(
            scene.statements,
            vec![
                Statement::Action("A long action line that wraps here.".into()),
                Statement::Dialogue {
                    character: "BOB".into(),
                    text: "First half second half.".into()
                }
            ]
        );
    }

    fn scene_with(n: usize) -> Screenplay {
        Screenplay {
            title: "t".into(),
            scenes: vec![Scene {
                index: 1,
                heading: Some("INT. X".into()),
                statements: (0..n).map(|i| Statement::Action(format!("s{i}"))).collect(),
            }],
        }
    }

    #[test]
    fn split_counts() {
        let sizes = |n| -> Vec<usize> {
            split_long_scenes(&scene_with(n), 60)
                .scenes
                .iter()
                .map(Scene::len)
                .collect()
        };
        assert_eq!(sizes(130), vec![60, 60, 10]);
        assert_eq!(sizes(60), vec![60]);
        assert_eq!(sizes(61), vec![60, 1]);
    }

    #[test]
    fn split_renumbers_and_recomputes_characters() {
        let mut sp = scene_with(3);
        sp.scenes[0].statements.push(Statement::Dialogue {
            character: "ANN".into(),
            text: "hi".into(),
        });
        sp.scenes.push(Scene {
            index: 2,
            heading: None,
            statements: vec![],
        });
        let out = split_long_scenes(&sp, 2);
        let idx: Vec<usize> = out.scenes.iter().map(|s| s.index).collect();
        assert_eq!(idx, vec![1, 2, 3]);
        assert!(out.scenes[0].characters().is_empty());
        assert_eq!(out.scenes[1].characters().len(), 1);
    }

    #[test]
    fn empty_scene_table_has_only_scene_row() {
        let sp = Screenplay {
            title: "T".into(),
            scenes: vec![Scene {
                index: 1,
                heading: Some("INT. NOWHERE".into()),
                statements: vec![],
            }],
        };
        let tsv = to_table(&sp);
        assert_eq!(tsv, format!("{TABLE_HEADER}\nT\t1\t1\tScene\t\tINT. NOWHERE\n"));
        assert_eq!(parse_table(&tsv).unwrap(), sp);
    }

    #[test]
    fn table_rejects_garbage() {
        assert!(parse_table("nope\n").is_err());
        assert!(parse_table(&format!("{TABLE_HEADER}\nT\t1\t1\tAction\t\tx\n")).is_err());
    }
}
