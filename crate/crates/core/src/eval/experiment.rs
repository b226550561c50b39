//! Grounded versus ungrounded answers over a persona grid.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::asp::{score_response, ResponseScore};
use super::stats::{paired_ttest, TTestReport};
use crate::ensemble::{to_wire, Detector, FlagRecord};
use crate::error::{Error, Result};
use crate::generation::{GenerationClient, PersonaBrief};
use crate::label::Theme;
use crate::persona::config::{DEFAULT_CONDITION, DEFAULT_OCCUPATIONS};
use crate::persona::{answer_request, KnowledgeBase, Passage};

pub const DEFAULT_AGES: [u32; 3] = [19, 25, 35];
pub const DEFAULT_ALPHA: f64 = 0.10;
pub const LABEL_A: &str = "Ungrounded";
pub const LABEL_B: &str = "Grounded";

fn default_questions(theme: Theme) -> Vec<String> {
    let qs: [&str; 8] = match theme {
        Theme::Education => [
            "What was school like for you?",
            "Which subject do you enjoy learning the most?",
            "How do your teachers help you learn?",
            "What do you do when a lesson is hard to follow?",
            "Would you like to study at college?",
            "How do you get along with your classmates?",
            "What helps you remember new things?",
            "What would you change about your school?",
        ],
        Theme::Employment => [
            "What do you do at work?",
            "How did you find your job?",
            "What is the hardest part of your work day?",
            "Who helps you when you have a problem at work?",
            "What are you proud of in your job?",
            "How do you travel to work?",
            "What would your dream job be?",
            "How do your coworkers treat you?",
        ],
        Theme::Family => [
            "Tell me about your family.",
            "What do you do with your family on weekends?",
            "What chores do you do at home?",
            "Who do you talk to when you feel upset?",
            "Do you want to live on your own one day?",
            "What family tradition do you like best?",
            "How does your family support your choices?",
            "What do you like to cook for your family?",
        ],
    };
    qs.iter().map(|q| q.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    pub ages: Vec<u32>,
    pub occupations: Vec<String>,
    pub themes: Vec<Theme>,
    pub questions: BTreeMap<Theme, Vec<String>>,
    /// Gender given to every grid persona.
    pub gender: String,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            ages: DEFAULT_AGES.to_vec(),
            occupations: DEFAULT_OCCUPATIONS.iter().map(|s| s.to_string()).collect(),
            themes: vec![Theme::Education, Theme::Employment, Theme::Family],
            questions: Theme::ALL.iter().map(|&t| (t, default_questions(t))).collect(),
            gender: "unspecified".into(),
        }
    }
}

impl ExperimentGrid {
    /// Reads a grid from JSON (`.json`) or TOML (anything else). Omitted
    /// fields take their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let grid: ExperimentGrid = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let mut fields = Vec::new();
        if self.ages.is_empty() {
            fields.push(crate::error::FieldError::new("ages", "must not be empty"));
        }
        if self.occupations.is_empty() {
            fields.push(crate::error::FieldError::new("occupations", "must not be empty"));
        }
        if self.themes.is_empty() {
            fields.push(crate::error::FieldError::new("themes", "must not be empty"));
        }
        for t in &self.themes {
            if self.questions.get(t).is_none_or(|q| q.is_empty()) {
                fields.push(crate::error::FieldError::new(
                    format!("questions.{t}"),
                    "needs at least one question",
                ));
            }
        }
        if fields.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(fields))
        }
    }

    /// Every cell, sorted by age, occupation, theme and question index.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &age in &self.ages {
            for occupation in &self.occupations {
                for &theme in &self.themes {
                    for (i, q) in self.questions.get(&theme).into_iter().flatten().enumerate() {
                        cells.push(Cell {
                            age,
                            occupation: occupation.clone(),
                            theme,
                            question_index: i,
                            question: q.clone(),
                        });
                    }
                }
            }
        }
        cells.sort_by(|a, b| a.key().cmp(&b.key()));
        cells
    }

    pub fn size(&self) -> usize {
        self.ages.len()
            * self.occupations.len()
            * self
                .themes
                .iter()
                .map(|t| self.questions.get(t).map_or(0, Vec::len))
                .sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub age: u32,
    pub occupation: String,
    pub theme: Theme,
    pub question_index: usize,
    pub question: String,
}

impl Cell {
    fn key(&self) -> (u32, &str, Theme, usize) {
        (self.age, &self.occupation, self.theme, self.question_index)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "age={} occupation={} theme={} question={}",
            self.age, self.occupation, self.theme, self.question_index
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub response: String,
    pub flags: Vec<FlagRecord>,
    pub score: ResponseScore,
    pub length_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub cell: Cell,
    pub a: ArmResult,
    pub b: ArmResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub alpha: f64,
    pub retrieval_k: usize,
    /// Cells answered concurrently.
    pub max_parallel: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            alpha: DEFAULT_ALPHA,
            retrieval_k: 3,
            max_parallel: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub observations: Vec<Observation>,
    /// Cells dropped because one arm produced no sentences.
    pub excluded: Vec<Cell>,
    pub series_a: Vec<f64>,
    pub series_b: Vec<f64>,
    pub report: TTestReport,
    pub table: String,
}

enum CellResult {
    Scored(Box<Observation>),
    Empty(Cell),
}

fn brief(grid: &ExperimentGrid, cell: &Cell) -> PersonaBrief {
    PersonaBrief {
        age: cell.age,
        gender: grid.gender.clone(),
        occupation: cell.occupation.clone(),
        condition: DEFAULT_CONDITION.to_string(),
        theme: cell.theme,
    }
}

fn run_cell(
    grid: &ExperimentGrid,
    cell: &Cell,
    system_a: &dyn GenerationClient,
    system_b: &dyn GenerationClient,
    detector: &Detector,
    kb: &KnowledgeBase,
    k: usize,
) -> Result<CellResult> {
    let persona = brief(grid, cell);
    let abort = |arm: &str, e: &dyn fmt::Display| Error::ExperimentCell(format!("{cell} system={arm}: {e}"));

    let response_a = system_a
        .generate(&answer_request(&persona, &cell.question, &[], true))
        .map_err(|e| abort(LABEL_A, &e))?;
    let query = format!("{} {}", cell.question, cell.occupation);
    let passages: Vec<&Passage> = kb
        .retrieve_theme(&query, cell.theme, k)
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    let response_b = system_b
        .generate(&answer_request(&persona, &cell.question, &passages, false))
        .map_err(|e| abort(LABEL_B, &e))?;

    let arm = |response: String, suffix: &str| {
        let flags = detector.detect(&response);
        let score = score_response(format!("{cell} system={suffix}"), &flags)?;
        Some(ArmResult {
            length_chars: response.chars().count(),
            flags: to_wire(&flags),
            score,
            response,
        })
    };
    match (arm(response_a, LABEL_A), arm(response_b, LABEL_B)) {
        (Some(a), Some(b)) => Ok(CellResult::Scored(Box::new(Observation {
            cell: cell.clone(),
            a,
            b,
        }))),
        _ => Ok(CellResult::Empty(cell.clone())),
    }
}

/// Asks both systems every grid question, scores each response and runs a
/// paired t-test on the ASP series (`a - b`). Any generation failure aborts
/// the run with the failing cell.
pub fn run_comparison(
    grid: &ExperimentGrid,
    system_a: &dyn GenerationClient,
    system_b: &dyn GenerationClient,
    detector: &Detector,
    kb: &KnowledgeBase,
    opts: &ExperimentOptions,
) -> Result<ComparisonOutcome> {
    grid.validate()?;
    let cells = grid.cells();
    let mut results = Vec::with_capacity(cells.len());
    for chunk in cells.chunks(opts.max_parallel.max(1)) {
        let chunk_results: Vec<Result<CellResult>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|cell| {
                    scope.spawn(move || run_cell(grid, cell, system_a, system_b, detector, kb, opts.retrieval_k))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("experiment worker")).collect()
        });
        for r in chunk_results {
            results.push(r?);
        }
    }

    let mut observations = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        match r {
            CellResult::Scored(o) => observations.push(*o),
            CellResult::Empty(c) => {
                log::warn!("{c}: a response had no sentences; pair excluded");
                excluded.push(c);
            }
        }
    }
    let series_a: Vec<f64> = observations.iter().map(|o| o.a.score.asp).collect();
    let series_b: Vec<f64> = observations.iter().map(|o| o.b.score.asp).collect();
    let report = paired_ttest(&series_a, &series_b, opts.alpha)?;
    let table = report.render_table(LABEL_A, LABEL_B, 100.0);
    Ok(ComparisonOutcome {
        observations,
        excluded,
        series_a,
        series_b,
        report,
        table,
    })
}

impl ComparisonOutcome {
    /// Writes `report.txt`, `report.json`, `series.csv` and
    /// `responses.jsonl` into `dir`.
    pub fn archive(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &self.table)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&self.report)?)?;

        let mut w = csv::Writer::from_path(dir.join("series.csv"))?;
        w.write_record(["age", "occupation", "theme", "question_index", "asp_a", "asp_b", "length_a", "length_b"])?;
        for o in &self.observations {
            w.write_record([
                o.cell.age.to_string(),
                o.cell.occupation.clone(),
                o.cell.theme.to_string(),
                o.cell.question_index.to_string(),
                format!("{:?}", o.a.score.asp),
                format!("{:?}", o.b.score.asp),
                o.a.length_chars.to_string(),
                o.b.length_chars.to_string(),
            ])?;
        }
        w.flush()?;

        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("responses.jsonl"))?);
        for o in &self.observations {
            serde_json::to_writer(&mut f, o)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok(())
    }
}
