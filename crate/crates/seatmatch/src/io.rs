//! File formats, quota policies, experiment orchestration, and reports.
//!
//! Three delimited text formats cover the pipeline. A students file has
//! columns `id,score,disadvantaged,lottery,prefs`, where `prefs` holds
//! pipe-separated school codes in preference order and `lottery` may be
//! empty. A schools file has columns `code,name,quota`. A matching file has
//! columns `id,school,seat_type` with `-` for unmatched and trailing `#`
//! comment lines carrying per-school summaries. A reserves file
//! (`code,reserved`) feeds the explicit quota policy.
//!
//! Everything rendered here is deterministic: identical inputs and seed
//! produce byte-identical outputs.

use crate::audit::{
    check_high_competitiveness, check_smart_reserve, compare_for_group,
    find_classical_blocking_pairs, find_in_group_blocking_pairs, rank_change_histogram,
    verify_jsa_dominates_mr, BlockingPair, GroupComparison, HighCompetitiveness,
    RankChangeHistogram, ReserveOrderCheck, SmartReserve, Witness,
};
use crate::engine::{run_mechanism, run_mechanism_traced, EngineError, Mechanism, MechanismRun};
use crate::model::{
    Group, Instance, PriorityOrder, ReservationQuotas, School, SchoolId, Student, StudentId,
    Violation,
};
use crate::split::{seat_types_for_run, SeatType, SplitError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const STUDENTS_HEADER: &str = "id,score,disadvantaged,lottery,prefs";
pub const SCHOOLS_HEADER: &str = "code,name,quota";
pub const RESERVES_HEADER: &str = "code,reserved";
pub const MATCHING_HEADER: &str = "id,school,seat_type";

/// A malformed input row, kept with its 1-based line number so a whole
/// file's problems can be reported in one pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

fn format_rows(errors: &[RowError]) -> String {
    errors
        .iter()
        .map(|e| format!("  line {}: {}", e.line, e.message))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Error, Debug)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: String, expected: &'static str, found: String },
    #[error("{path}: {} malformed row(s)\n{}", .errors.len(), format_rows(.errors))]
    Rows { path: String, errors: Vec<RowError> },
    #[error("percent fraction {fraction} outside [0, 1]")]
    PercentRange { fraction: f64 },
    #[error("school {school} reserves {reserved} of only {quota} seats")]
    ReserveBound { school: String, reserved: usize, quota: usize },
    #[error("explicit reserves cover {got} schools, market has {expected}")]
    ReserveCount { got: usize, expected: usize },
    #[error("invalid market:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidMarket(Vec<Violation>),
    #[error("students {a} and {b} share score {score} and lottery {lottery}")]
    LotteryCollision { a: String, b: String, score: f64, lottery: u64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Split(#[from] SplitError),
}

impl IoError {
    /// True for failures that indicate a bug in this library rather than a
    /// problem with the input files.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            IoError::LotteryCollision { .. } | IoError::Engine(_) | IoError::Split(_)
        )
    }
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------------------
// Loading

/// School codes, display names, and quotas in file order; `SchoolId` is the
/// row index.
#[derive(Clone, Debug)]
pub struct SchoolTable {
    pub codes: Vec<String>,
    pub names: Vec<String>,
    pub quotas: Vec<usize>,
    index: BTreeMap<String, SchoolId>,
}

impl SchoolTable {
    pub fn new(codes: Vec<String>, names: Vec<String>, quotas: Vec<usize>) -> Self {
        let index = codes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        SchoolTable { codes, names, quotas, index }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn resolve(&self, code: &str) -> Option<SchoolId> {
        self.index.get(code).copied()
    }

    pub fn code(&self, c: SchoolId) -> &str {
        &self.codes[c]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudentRecord {
    pub id: String,
    pub score: f64,
    pub disadvantaged: bool,
    pub lottery: Option<u64>,
    /// Preference list, already resolved to school ids.
    pub prefs: Vec<SchoolId>,
}

fn open_csv(
    path: &Path,
    expected_header: &'static str,
) -> Result<Vec<(u64, csv::StringRecord)>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IoError::Csv { path: path.display().to_string(), source: e })?;
    let header = reader
        .headers()
        .map_err(|e| IoError::Csv { path: path.display().to_string(), source: e })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != expected_header {
        return Err(IoError::Header {
            path: path.display().to_string(),
            expected: expected_header,
            found: header,
        });
    }
    let mut rows = Vec::new();
    let mut fallback_line = 1;
    for result in reader.records() {
        fallback_line += 1;
        match result {
            Ok(record) => {
                let line = record.position().map_or(fallback_line, |p| p.line());
                fallback_line = line;
                rows.push((line, record));
            }
            Err(e) => {
                return Err(IoError::Csv { path: path.display().to_string(), source: e })
            }
        }
    }
    Ok(rows)
}

fn bad_row(errors: &mut Vec<RowError>, line: u64, message: impl Into<String>) {
    errors.push(RowError { line, message: message.into() });
}

pub fn load_schools(path: &Path) -> Result<SchoolTable, IoError> {
    let rows = open_csv(path, SCHOOLS_HEADER)?;
    let mut codes = Vec::new();
    let mut names = Vec::new();
    let mut quotas = Vec::new();
    let mut seen = BTreeSet::new();
    let mut errors = Vec::new();
    for (line, record) in rows {
        let code = record.get(0).unwrap_or("").to_string();
        if code.is_empty() || code == "-" || code.contains('|') {
            bad_row(&mut errors, line, format!("unusable school code `{code}`"));
            continue;
        }
        if !seen.insert(code.clone()) {
            bad_row(&mut errors, line, format!("duplicate school code `{code}`"));
            continue;
        }
        let quota = match record.get(2).unwrap_or("").parse::<usize>() {
            Ok(q) => q,
            Err(_) => {
                bad_row(&mut errors, line, format!("quota `{}` is not a count", record.get(2).unwrap_or("")));
                continue;
            }
        };
        codes.push(code);
        names.push(record.get(1).unwrap_or("").to_string());
        quotas.push(quota);
    }
    if !errors.is_empty() {
        return Err(IoError::Rows { path: path.display().to_string(), errors });
    }
    Ok(SchoolTable::new(codes, names, quotas))
}

fn parse_flag_bool(text: &str) -> Option<bool> {
    match text.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Parses every row it can, collecting the rest into `RowError`s. Duplicate
/// ids, unknown school codes, and repeated codes within one list are row
/// errors; earlier valid rows are still returned.
pub fn load_students_lenient(
    path: &Path,
    table: &SchoolTable,
) -> Result<(Vec<StudentRecord>, Vec<RowError>), IoError> {
    let rows = open_csv(path, STUDENTS_HEADER)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (line, record) in rows {
        let id = record.get(0).unwrap_or("").to_string();
        if id.is_empty() || id == "-" {
            bad_row(&mut errors, line, format!("unusable student id `{id}`"));
            continue;
        }
        if !seen_ids.insert(id.clone()) {
            bad_row(&mut errors, line, format!("duplicate student id `{id}`"));
            continue;
        }
        let score = match record.get(1).unwrap_or("").parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                bad_row(&mut errors, line, format!("score `{}` is not a number", record.get(1).unwrap_or("")));
                continue;
            }
        };
        let disadvantaged = match parse_flag_bool(record.get(2).unwrap_or("")) {
            Some(b) => b,
            None => {
                bad_row(&mut errors, line, format!("disadvantaged flag `{}` is not a boolean", record.get(2).unwrap_or("")));
                continue;
            }
        };
        let lottery_field = record.get(3).unwrap_or("");
        let lottery = if lottery_field.is_empty() {
            None
        } else {
            match lottery_field.parse::<u64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    bad_row(&mut errors, line, format!("lottery `{lottery_field}` is not an unsigned integer"));
                    continue;
                }
            }
        };
        let prefs_field = record.get(4).unwrap_or("");
        let mut prefs = Vec::new();
        let mut listed = BTreeSet::new();
        let mut row_ok = true;
        if !prefs_field.is_empty() {
            for code in prefs_field.split('|').map(str::trim) {
                match table.resolve(code) {
                    Some(c) if listed.insert(c) => prefs.push(c),
                    Some(_) => {
                        bad_row(&mut errors, line, format!("school `{code}` listed twice"));
                        row_ok = false;
                        break;
                    }
                    None => {
                        bad_row(&mut errors, line, format!("unknown school code `{code}`"));
                        row_ok = false;
                        break;
                    }
                }
            }
        }
        if row_ok {
            records.push(StudentRecord { id, score, disadvantaged, lottery, prefs });
        }
    }
    Ok((records, errors))
}

/// Strict loader: any malformed row fails the whole file.
pub fn load_students(path: &Path, table: &SchoolTable) -> Result<Vec<StudentRecord>, IoError> {
    let (records, errors) = load_students_lenient(path, table)?;
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(IoError::Rows { path: path.display().to_string(), errors })
    }
}

/// Per-school reserved-seat counts from a `code,reserved` file. Schools the
/// file does not mention reserve zero seats.
pub fn load_reserves(path: &Path, table: &SchoolTable) -> Result<Vec<usize>, IoError> {
    let rows = open_csv(path, RESERVES_HEADER)?;
    let mut reserves = vec![0usize; table.len()];
    let mut seen = BTreeSet::new();
    let mut errors = Vec::new();
    for (line, record) in rows {
        let code = record.get(0).unwrap_or("");
        let Some(school) = table.resolve(code) else {
            bad_row(&mut errors, line, format!("unknown school code `{code}`"));
            continue;
        };
        if !seen.insert(school) {
            bad_row(&mut errors, line, format!("duplicate school code `{code}`"));
            continue;
        }
        match record.get(1).unwrap_or("").parse::<usize>() {
            Ok(r) => reserves[school] = r,
            Err(_) => bad_row(&mut errors, line, format!("reserved `{}` is not a count", record.get(1).unwrap_or(""))),
        }
    }
    if !errors.is_empty() {
        return Err(IoError::Rows { path: path.display().to_string(), errors });
    }
    Ok(reserves)
}

// ---------------------------------------------------------------------------
// Priority and instance assembly

/// Single priority order from scores: descending score, ties by ascending
/// lottery number. Records without a lottery number receive seed-derived
/// draws, disjoint from every provided number and from each other, so a
/// fixed seed fills the gaps reproducibly. Two records that tie on both
/// score and lottery make the order ill-defined, which is an error.
pub fn build_priority(
    records: &[StudentRecord],
    seed: u64,
) -> Result<(PriorityOrder, Vec<u64>), IoError> {
    let mut used: BTreeSet<u64> = records.iter().filter_map(|r| r.lottery).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let lotteries: Vec<u64> = records
        .iter()
        .map(|r| {
            r.lottery.unwrap_or_else(|| loop {
                let draw: u64 = rng.random();
                if used.insert(draw) {
                    break draw;
                }
            })
        })
        .collect();

    let mut order: Vec<StudentId> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b]
            .score
            .partial_cmp(&records[a].score)
            .expect("scores are finite")
            .then(lotteries[a].cmp(&lotteries[b]))
    });
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if records[a].score == records[b].score && lotteries[a] == lotteries[b] {
            return Err(IoError::LotteryCollision {
                a: records[a].id.clone(),
                b: records[b].id.clone(),
                score: records[a].score,
                lottery: lotteries[a],
            });
        }
    }
    Ok((PriorityOrder::from_ranked(&order), lotteries))
}

/// Builds the market: students in record order, every school carrying the
/// same score-and-lottery priority.
pub fn build_instance(
    records: &[StudentRecord],
    table: &SchoolTable,
    priority: &PriorityOrder,
) -> Instance {
    let students = records
        .iter()
        .map(|r| Student {
            group: if r.disadvantaged { Group::Disadvantaged } else { Group::Advantaged },
            prefs: r.prefs.clone(),
        })
        .collect();
    let schools = table
        .quotas
        .iter()
        .map(|&quota| School { quota, priority: priority.clone() })
        .collect();
    Instance::new(students, schools)
}

// ---------------------------------------------------------------------------
// Quota policies

#[derive(Clone, Debug, PartialEq)]
pub enum QuotaPolicy {
    /// Reserve ceil(quota * fraction) seats at every school.
    Percent(f64),
    /// Reserve ceil(quota * |disadvantaged| / |students|) seats, matching
    /// the disadvantaged share of the market.
    Proportional,
    /// Per-school counts, index-aligned with the school table.
    Explicit(Vec<usize>),
}

impl QuotaPolicy {
    /// Parses the command-line form: `percent:F`, `proportional`, or
    /// `file:PATH` (the file is read later, against the school table).
    pub fn parse_flag(text: &str) -> Result<QuotaPolicySource, String> {
        if text == "proportional" {
            return Ok(QuotaPolicySource::Policy(QuotaPolicy::Proportional));
        }
        if let Some(fraction) = text.strip_prefix("percent:") {
            let f: f64 = fraction
                .parse()
                .map_err(|_| format!("`{fraction}` is not a number"))?;
            return Ok(QuotaPolicySource::Policy(QuotaPolicy::Percent(f)));
        }
        if let Some(path) = text.strip_prefix("file:") {
            return Ok(QuotaPolicySource::File(PathBuf::from(path)));
        }
        Err(format!(
            "`{text}` is not a quota policy; use percent:F, proportional, or file:PATH"
        ))
    }
}

/// A policy as named on the command line; `File` still needs the school
/// table to become explicit counts.
#[derive(Clone, Debug, PartialEq)]
pub enum QuotaPolicySource {
    Policy(QuotaPolicy),
    File(PathBuf),
}

impl QuotaPolicySource {
    pub fn resolve(&self, table: &SchoolTable) -> Result<QuotaPolicy, IoError> {
        match self {
            QuotaPolicySource::Policy(p) => Ok(p.clone()),
            QuotaPolicySource::File(path) => {
                Ok(QuotaPolicy::Explicit(load_reserves(path, table)?))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            QuotaPolicySource::Policy(QuotaPolicy::Percent(f)) => format!("percent {f}"),
            QuotaPolicySource::Policy(QuotaPolicy::Proportional) => "proportional".into(),
            QuotaPolicySource::Policy(QuotaPolicy::Explicit(_)) => "explicit".into(),
            QuotaPolicySource::File(path) => format!("file {}", path.display()),
        }
    }
}

/// Rounds a quota fraction up to a seat count. The product is nudged before
/// the ceiling so that fractions which are exact in decimal (0.2 * 635 =
/// 127) are not pushed up a seat by binary representation error.
fn ceil_fraction(quota: usize, fraction: f64) -> usize {
    ((quota as f64 * fraction) - 1e-9).ceil().max(0.0) as usize
}

pub fn apply_quota_policy(
    policy: &QuotaPolicy,
    instance: &Instance,
    table: &SchoolTable,
) -> Result<ReservationQuotas, IoError> {
    let reserves: Vec<usize> = match policy {
        QuotaPolicy::Percent(fraction) => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(IoError::PercentRange { fraction: *fraction });
            }
            instance.schools().iter().map(|sch| ceil_fraction(sch.quota, *fraction)).collect()
        }
        QuotaPolicy::Proportional => {
            let total = instance.num_students();
            let dis = instance.group_members(Group::Disadvantaged).count();
            instance
                .schools()
                .iter()
                .map(|sch| if total == 0 { 0 } else { (sch.quota * dis).div_ceil(total) })
                .collect()
        }
        QuotaPolicy::Explicit(counts) => {
            if counts.len() != instance.num_schools() {
                return Err(IoError::ReserveCount {
                    got: counts.len(),
                    expected: instance.num_schools(),
                });
            }
            counts.clone()
        }
    };
    for (c, (&reserved, school)) in reserves.iter().zip(instance.schools()).enumerate() {
        if reserved > school.quota {
            return Err(IoError::ReserveBound {
                school: table.code(c).to_string(),
                reserved,
                quota: school.quota,
            });
        }
    }
    Ok(ReservationQuotas::new(reserves))
}

// ---------------------------------------------------------------------------
// Matching files

fn seat_type_field(seat: Option<SeatType>) -> &'static str {
    match seat {
        Some(t) => t.key(),
        None => "-",
    }
}

/// One row per student in record order, then `#` summary comments: one per
/// school with admit counts and the disadvantaged proportion, one total.
pub fn render_matching_csv(
    table: &SchoolTable,
    records: &[StudentRecord],
    instance: &Instance,
    quotas: &ReservationQuotas,
    matching: &crate::model::Matching,
    seat_types: &[Option<SeatType>],
) -> String {
    let mut out = String::new();
    out.push_str(MATCHING_HEADER);
    out.push('\n');
    for (s, record) in records.iter().enumerate() {
        match matching.school_of(s) {
            Some(c) => {
                let _ = writeln!(out, "{},{},{}", record.id, table.code(c), seat_type_field(seat_types[s]));
            }
            None => {
                let _ = writeln!(out, "{},-,-", record.id);
            }
        }
    }
    for c in 0..instance.num_schools() {
        let admitted = matching.students_of(c).len();
        let dis = matching.group_at(instance, c, Group::Disadvantaged);
        let quota = instance.schools()[c].quota;
        let proportion = if quota == 0 { 0.0 } else { dis as f64 / quota as f64 };
        let _ = writeln!(
            out,
            "# school {}: quota {}, reserved {}, admitted {}, disadvantaged {}, proportion {:.3}",
            table.code(c),
            quota,
            quotas.reserved(c),
            admitted,
            dis,
            proportion
        );
    }
    let _ = writeln!(
        out,
        "# total: matched {}/{}, disadvantaged matched {}/{}",
        matching.matched_count(),
        instance.num_students(),
        matching.matched_in_group(instance, Group::Disadvantaged),
        instance.group_members(Group::Disadvantaged).count()
    );
    out
}

/// Reads a matching file back against the same market. Every record id must
/// appear exactly once; unknown ids, unknown schools, and repeated ids are
/// row errors.
pub fn parse_matching(
    path: &Path,
    table: &SchoolTable,
    records: &[StudentRecord],
    num_schools: usize,
) -> Result<(crate::model::Matching, Vec<Option<SeatType>>), IoError> {
    let by_id: BTreeMap<&str, StudentId> =
        records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let rows = open_csv(path, MATCHING_HEADER)?;
    let mut assigned: Vec<Option<Option<SchoolId>>> = vec![None; records.len()];
    let mut seats: Vec<Option<SeatType>> = vec![None; records.len()];
    let mut errors = Vec::new();
    for (line, record) in rows {
        let id = record.get(0).unwrap_or("");
        let Some(&s) = by_id.get(id) else {
            bad_row(&mut errors, line, format!("unknown student id `{id}`"));
            continue;
        };
        if assigned[s].is_some() {
            bad_row(&mut errors, line, format!("duplicate student id `{id}`"));
            continue;
        }
        let school_field = record.get(1).unwrap_or("");
        let school = if school_field == "-" {
            None
        } else {
            match table.resolve(school_field) {
                Some(c) => Some(c),
                None => {
                    bad_row(&mut errors, line, format!("unknown school code `{school_field}`"));
                    continue;
                }
            }
        };
        let seat_field = record.get(2).unwrap_or("");
        seats[s] = match seat_field {
            "-" => None,
            "general" => Some(SeatType::General),
            "reserved" => Some(SeatType::Reserved),
            other => {
                bad_row(&mut errors, line, format!("unknown seat type `{other}`"));
                continue;
            }
        };
        assigned[s] = Some(school);
    }
    for (s, slot) in assigned.iter().enumerate() {
        if slot.is_none() {
            bad_row(&mut errors, 0, format!("student `{}` missing from matching", records[s].id));
        }
    }
    if !errors.is_empty() {
        return Err(IoError::Rows { path: path.display().to_string(), errors });
    }
    let assignments: Vec<Option<SchoolId>> = assigned.into_iter().map(Option::unwrap).collect();
    Ok((crate::model::Matching::from_assignments(assignments, num_schools), seats))
}

// ---------------------------------------------------------------------------
// Market files (the generator's output)

fn format_score(score: f64) -> String {
    if score.fract() == 0.0 && score.abs() < 1e15 {
        format!("{}", score as i64)
    } else {
        format!("{score:.6}")
    }
}

/// Writes `students.csv`, `schools.csv`, and `reserves.csv` for a market.
/// Student ids are `a1, a2, ...` and `d1, d2, ...` by group in index order;
/// school codes are `c1, c2, ...`. Scores default to "students minus
/// priority rank" so that reloading rebuilds the same priority; explicit
/// `scores` (for potential-based markets) are written at six decimals with
/// the priority rank as lottery number, which also reloads exactly.
pub fn write_market(
    dir: &Path,
    instance: &Instance,
    quotas: &ReservationQuotas,
    scores: Option<&[f64]>,
) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let reference = &instance.schools()[0].priority;

    let mut students = String::from(STUDENTS_HEADER);
    students.push('\n');
    let (mut adv_seen, mut dis_seen) = (0usize, 0usize);
    for (s, student) in instance.students().iter().enumerate() {
        let id = match student.group {
            Group::Advantaged => {
                adv_seen += 1;
                format!("a{adv_seen}")
            }
            Group::Disadvantaged => {
                dis_seen += 1;
                format!("d{dis_seen}")
            }
        };
        let rank = reference.rank(s);
        let score = match scores {
            Some(all) => format_score(all[s]),
            None => format!("{}", instance.num_students() as u64 - u64::from(rank)),
        };
        let prefs =
            student.prefs.iter().map(|&c| format!("c{}", c + 1)).collect::<Vec<_>>().join("|");
        let _ = writeln!(students, "{id},{score},{},{rank},{prefs}", student.group == Group::Disadvantaged);
    }

    let mut schools = String::from(SCHOOLS_HEADER);
    schools.push('\n');
    let mut reserves = String::from(RESERVES_HEADER);
    reserves.push('\n');
    for (c, school) in instance.schools().iter().enumerate() {
        let _ = writeln!(schools, "c{},School {},{}", c + 1, c + 1, school.quota);
        let _ = writeln!(reserves, "c{},{}", c + 1, quotas.reserved(c));
    }

    let paths = [
        ("students.csv", students),
        ("schools.csv", schools),
        ("reserves.csv", reserves),
    ];
    let mut written = Vec::new();
    for (name, content) in paths {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Experiments and reports

/// Everything parsed and derived from one market's input files.
pub struct LoadedMarket {
    pub table: SchoolTable,
    pub records: Vec<StudentRecord>,
    pub instance: Instance,
    pub quotas: ReservationQuotas,
    pub lotteries: Vec<u64>,
}

pub fn load_market(
    students_path: &Path,
    schools_path: &Path,
    policy: &QuotaPolicySource,
    seed: u64,
) -> Result<LoadedMarket, IoError> {
    let table = load_schools(schools_path)?;
    let records = load_students(students_path, &table)?;
    let (priority, lotteries) = build_priority(&records, seed)?;
    let instance = build_instance(&records, &table, &priority);
    let quotas = apply_quota_policy(&policy.resolve(&table)?, &instance, &table)?;
    let violations = crate::model::validate_market(&instance, &quotas);
    if !violations.is_empty() {
        return Err(IoError::InvalidMarket(violations));
    }
    Ok(LoadedMarket { table, records, instance, quotas, lotteries })
}

pub struct RunConfig {
    pub students_path: PathBuf,
    pub schools_path: PathBuf,
    pub mechanisms: Vec<Mechanism>,
    pub policy: QuotaPolicySource,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub trace: bool,
}

pub struct MechanismReport {
    pub run: MechanismRun,
    pub seat_types: Vec<Option<SeatType>>,
    pub classical_pairs: Vec<BlockingPair>,
    pub disadvantaged_pairs: Vec<BlockingPair>,
    pub advantaged_pairs: Vec<BlockingPair>,
}

pub struct PairComparison {
    pub from: Mechanism,
    pub to: Mechanism,
    pub disadvantaged: GroupComparison,
    pub advantaged: GroupComparison,
    pub disadvantaged_hist: RankChangeHistogram,
    pub advantaged_hist: RankChangeHistogram,
}

pub struct ExperimentOutcome {
    pub market: LoadedMarket,
    pub reports: Vec<MechanismReport>,
    pub comparisons: Vec<PairComparison>,
    pub high_competitiveness: Option<HighCompetitiveness>,
    pub smart_reserve: Option<SmartReserve>,
    pub reserve_order: Option<ReserveOrderCheck>,
    pub text: String,
    pub written: Vec<PathBuf>,
}

impl ExperimentOutcome {
    /// True when a checked dominance guarantee failed, which signals an
    /// engine bug rather than bad input.
    pub fn theorem_violated(&self) -> bool {
        self.reserve_order.as_ref().is_some_and(|r| r.violated)
    }
}

fn pair_line(table: &SchoolTable, records: &[StudentRecord], pair: &BlockingPair) -> String {
    let witness = match pair.witness {
        Witness::VacantSeat => "a vacant seat".to_string(),
        Witness::Displaced(who) => format!("lower priority than {}", records[who].id),
    };
    format!(
        "    {} claims {} ({})",
        records[pair.student].id,
        table.code(pair.school),
        witness
    )
}

fn write_pairs_section(
    out: &mut String,
    table: &SchoolTable,
    records: &[StudentRecord],
    label: &str,
    pairs: &[BlockingPair],
) {
    const LISTED: usize = 20;
    let _ = writeln!(out, "  {label}: {}", pairs.len());
    for pair in pairs.iter().take(LISTED) {
        let _ = writeln!(out, "{}", pair_line(table, records, pair));
    }
    if pairs.len() > LISTED {
        let _ = writeln!(out, "    ... and {} more", pairs.len() - LISTED);
    }
}

fn histogram_line(hist: &RankChangeHistogram) -> String {
    let mut parts: Vec<String> = hist
        .deltas
        .iter()
        .map(|(delta, count)| format!("{delta:+}:{count}"))
        .collect();
    if hist.gained_seat > 0 {
        parts.push(format!("gained:{}", hist.gained_seat));
    }
    if hist.lost_seat > 0 {
        parts.push(format!("lost:{}", hist.lost_seat));
    }
    if parts.is_empty() {
        "empty".to_string()
    } else {
        parts.join(" ")
    }
}

fn group_label(group: Group) -> &'static str {
    match group {
        Group::Advantaged => "advantaged",
        Group::Disadvantaged => "disadvantaged",
    }
}

fn render_report(
    config_line: &str,
    market: &LoadedMarket,
    reports: &[MechanismReport],
    comparisons: &[PairComparison],
    hc: &Option<HighCompetitiveness>,
    smart: &Option<SmartReserve>,
    reserve_order: &Option<ReserveOrderCheck>,
    trace: bool,
) -> String {
    let instance = &market.instance;
    let table = &market.table;
    let records = &market.records;
    let mut out = String::new();
    let dis_total = instance.group_members(Group::Disadvantaged).count();
    let _ = writeln!(
        out,
        "market: {} students ({} disadvantaged), {} schools",
        instance.num_students(),
        dis_total,
        instance.num_schools()
    );
    let _ = writeln!(out, "{config_line}");
    let reserves_line = (0..instance.num_schools())
        .map(|c| format!("{} {}/{}", table.code(c), market.quotas.reserved(c), instance.schools()[c].quota))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "reserves: {reserves_line}");

    for report in reports {
        let run = &report.run;
        let matching = &run.matching;
        let _ = writeln!(out, "\n[{}]", run.mechanism.key());
        let _ = writeln!(
            out,
            "  matched {}/{}, disadvantaged matched {}/{}, rounds {}",
            matching.matched_count(),
            instance.num_students(),
            matching.matched_in_group(instance, Group::Disadvantaged),
            dis_total,
            run.rounds
        );
        write_pairs_section(&mut out, table, records, "blocking pairs (classical)", &report.classical_pairs);
        write_pairs_section(&mut out, table, records, "blocking pairs (within disadvantaged)", &report.disadvantaged_pairs);
        write_pairs_section(&mut out, table, records, "blocking pairs (within advantaged)", &report.advantaged_pairs);
        let _ = writeln!(out, "  school  quota  reserved  admitted  disadvantaged  proportion");
        for c in 0..instance.num_schools() {
            let quota = instance.schools()[c].quota;
            let dis = matching.group_at(instance, c, Group::Disadvantaged);
            let proportion = if quota == 0 { 0.0 } else { dis as f64 / quota as f64 };
            let _ = writeln!(
                out,
                "  {:<6}  {:<5}  {:<8}  {:<8}  {:<13}  {:.3}",
                table.code(c),
                quota,
                market.quotas.reserved(c),
                matching.students_of(c).len(),
                dis,
                proportion
            );
        }
        if trace {
            if let Some(stages) = &run.trace {
                for stage in stages {
                    let proposals: usize = stage.rounds.iter().map(|r| r.proposals.len()).sum();
                    let rejections: usize = stage.rounds.iter().map(|r| r.rejections.len()).sum();
                    let _ = writeln!(
                        out,
                        "  trace {}: rounds {}, proposals {}, rejections {}",
                        stage.stage,
                        stage.rounds.len(),
                        proposals,
                        rejections
                    );
                }
            }
        }
    }

    for cmp in comparisons {
        let _ = writeln!(out, "\n[{} vs {}]", cmp.from.key(), cmp.to.key());
        for (group_cmp, hist) in [
            (&cmp.disadvantaged, &cmp.disadvantaged_hist),
            (&cmp.advantaged, &cmp.advantaged_hist),
        ] {
            let _ = writeln!(
                out,
                "  {}: {:?} (better in {} {}, better in {} {})",
                group_label(group_cmp.group),
                group_cmp.verdict,
                cmp.from.key(),
                group_cmp.prefer_first.len(),
                cmp.to.key(),
                group_cmp.prefer_second.len()
            );
            let _ = writeln!(out, "    rank deltas ({} -> {}): {}", cmp.from.key(), cmp.to.key(), histogram_line(hist));
        }
    }

    if hc.is_some() || smart.is_some() || reserve_order.is_some() {
        let _ = writeln!(out, "\n[reserve checks]");
    }
    if let Some(hc) = hc {
        let slack = hc.slack.iter().min().copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "  high competitiveness: {} (minimum reserve slack {slack})",
            if hc.holds { "holds" } else { "fails" }
        );
    }
    if let Some(smart) = smart {
        let worst = smart.shortfall.iter().max().copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "  smart reserve: {} (worst shortfall {worst})",
            if smart.holds { "holds" } else { "fails" }
        );
    }
    if let Some(ro) = reserve_order {
        let _ = writeln!(
            out,
            "  jsa vs mr for disadvantaged students: {:?}{}",
            ro.comparison.verdict,
            if ro.violated { " THEOREM VIOLATION" } else { "" }
        );
    }
    out
}

/// Loads a market, runs the requested mechanisms, audits each run, compares
/// every pair, and (when an output directory is given) writes matching
/// files, the report, and rank-change histograms.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutcome, IoError> {
    let market = load_market(
        &config.students_path,
        &config.schools_path,
        &config.policy,
        config.seed,
    )?;
    let mut mechanisms = Vec::new();
    for &m in &config.mechanisms {
        if !mechanisms.contains(&m) {
            mechanisms.push(m);
        }
    }

    let mut reports = Vec::new();
    for &mechanism in &mechanisms {
        let run = run_mechanism_traced(mechanism, &market.instance, &market.quotas, config.trace)?;
        let seat_types = seat_types_for_run(&market.instance, &market.quotas, mechanism)?;
        let classical_pairs = find_classical_blocking_pairs(&market.instance, &run.matching);
        let disadvantaged_pairs =
            find_in_group_blocking_pairs(&market.instance, &run.matching, Group::Disadvantaged);
        let advantaged_pairs =
            find_in_group_blocking_pairs(&market.instance, &run.matching, Group::Advantaged);
        reports.push(MechanismReport {
            run,
            seat_types,
            classical_pairs,
            disadvantaged_pairs,
            advantaged_pairs,
        });
    }

    let mut comparisons = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (from, to) = (&reports[i].run, &reports[j].run);
            comparisons.push(PairComparison {
                from: from.mechanism,
                to: to.mechanism,
                disadvantaged: compare_for_group(
                    &market.instance,
                    &from.matching,
                    &to.matching,
                    Group::Disadvantaged,
                ),
                advantaged: compare_for_group(
                    &market.instance,
                    &from.matching,
                    &to.matching,
                    Group::Advantaged,
                ),
                disadvantaged_hist: rank_change_histogram(
                    &market.instance,
                    &from.matching,
                    &to.matching,
                    Group::Disadvantaged,
                ),
                advantaged_hist: rank_change_histogram(
                    &market.instance,
                    &from.matching,
                    &to.matching,
                    Group::Advantaged,
                ),
            });
        }
    }

    let by_mechanism = |m: Mechanism| reports.iter().find(|r| r.run.mechanism == m);
    let high_competitiveness = by_mechanism(Mechanism::MinorityReserve)
        .map(|r| check_high_competitiveness(&market.instance, &market.quotas, &r.run.matching));
    let smart_reserve = by_mechanism(Mechanism::Base)
        .map(|r| check_smart_reserve(&market.instance, &market.quotas, &r.run.matching));
    let reserve_order = if by_mechanism(Mechanism::MinorityReserve).is_some()
        && by_mechanism(Mechanism::JointSeats).is_some()
    {
        Some(verify_jsa_dominates_mr(&market.instance, &market.quotas)?)
    } else {
        None
    };

    let config_line = format!("policy: {}, seed {}", config.policy.describe(), config.seed);
    let text = render_report(
        &config_line,
        &market,
        &reports,
        &comparisons,
        &high_competitiveness,
        &smart_reserve,
        &reserve_order,
        config.trace,
    );

    let mut written = Vec::new();
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for report in &reports {
            let path = dir.join(format!("{}.matching.csv", report.run.mechanism.key()));
            let csv = render_matching_csv(
                &market.table,
                &market.records,
                &market.instance,
                &market.quotas,
                &report.run.matching,
                &report.seat_types,
            );
            std::fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
            written.push(path);
        }
        for cmp in &comparisons {
            let path = dir.join(format!(
                "rank-changes-{}-{}-disadvantaged.svg",
                cmp.from.key(),
                cmp.to.key()
            ));
            let title = format!(
                "disadvantaged rank changes, {} to {}",
                cmp.from.key(),
                cmp.to.key()
            );
            std::fs::write(&path, render_rank_histogram_svg(&title, &cmp.disadvantaged_hist))
                .map_err(|e| io_err(&path, e))?;
            written.push(path);
        }
        let path = dir.join("report.txt");
        std::fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }

    Ok(ExperimentOutcome {
        market,
        reports,
        comparisons,
        high_competitiveness,
        smart_reserve,
        reserve_order,
        text,
        written,
    })
}

/// Full audit of one existing matching: validity, blocking pairs, per-school
/// admissions, the reserve flags, and how the matching compares to a fresh
/// run of the plain mechanism on the same market.
pub fn audit_matching(
    market: &LoadedMarket,
    matching: &crate::model::Matching,
) -> Result<String, IoError> {
    let violations = matching.validate(&market.instance);
    if !violations.is_empty() {
        return Err(IoError::InvalidMarket(violations));
    }
    let instance = &market.instance;
    let table = &market.table;
    let mut out = String::new();
    let dis_total = instance.group_members(Group::Disadvantaged).count();
    let _ = writeln!(
        out,
        "matched {}/{}, disadvantaged matched {}/{}",
        matching.matched_count(),
        instance.num_students(),
        matching.matched_in_group(instance, Group::Disadvantaged),
        dis_total
    );
    write_pairs_section(
        &mut out,
        table,
        &market.records,
        "blocking pairs (classical)",
        &find_classical_blocking_pairs(instance, matching),
    );
    write_pairs_section(
        &mut out,
        table,
        &market.records,
        "blocking pairs (within disadvantaged)",
        &find_in_group_blocking_pairs(instance, matching, Group::Disadvantaged),
    );
    write_pairs_section(
        &mut out,
        table,
        &market.records,
        "blocking pairs (within advantaged)",
        &find_in_group_blocking_pairs(instance, matching, Group::Advantaged),
    );
    let _ = writeln!(out, "  school  quota  reserved  admitted  disadvantaged  proportion");
    for c in 0..instance.num_schools() {
        let quota = instance.schools()[c].quota;
        let dis = matching.group_at(instance, c, Group::Disadvantaged);
        let proportion = if quota == 0 { 0.0 } else { dis as f64 / quota as f64 };
        let _ = writeln!(
            out,
            "  {:<6}  {:<5}  {:<8}  {:<8}  {:<13}  {:.3}",
            table.code(c),
            quota,
            market.quotas.reserved(c),
            matching.students_of(c).len(),
            dis,
            proportion
        );
    }

    let hc = check_high_competitiveness(instance, &market.quotas, matching);
    let _ = writeln!(
        out,
        "high competitiveness: {} (minimum reserve slack {})",
        if hc.holds { "holds" } else { "fails" },
        hc.slack.iter().min().copied().unwrap_or(0)
    );
    let base = run_mechanism(Mechanism::Base, instance, &market.quotas)?.matching;
    let smart = check_smart_reserve(instance, &market.quotas, &base);
    let _ = writeln!(
        out,
        "smart reserve: {} (worst shortfall {})",
        if smart.holds { "holds" } else { "fails" },
        smart.shortfall.iter().max().copied().unwrap_or(0)
    );
    for group in [Group::Disadvantaged, Group::Advantaged] {
        let cmp = compare_for_group(instance, matching, &base, group);
        let hist = rank_change_histogram(instance, &base, matching, group);
        let _ = writeln!(
            out,
            "vs a fresh plain run, {}: {:?} (rank deltas from plain: {})",
            group_label(group),
            cmp.verdict,
            histogram_line(&hist)
        );
    }
    Ok(out)
}

/// Group-wise dominance verdicts and rank movement between two matchings.
pub fn compare_matchings(
    market: &LoadedMarket,
    first: &crate::model::Matching,
    second: &crate::model::Matching,
    labels: (&str, &str),
) -> Result<String, IoError> {
    for m in [first, second] {
        let violations = m.validate(&market.instance);
        if !violations.is_empty() {
            return Err(IoError::InvalidMarket(violations));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "comparing {} against {}", labels.0, labels.1);
    for group in [Group::Disadvantaged, Group::Advantaged] {
        let cmp = compare_for_group(&market.instance, first, second, group);
        let hist = rank_change_histogram(&market.instance, first, second, group);
        let _ = writeln!(
            out,
            "  {}: {:?} (better in {} {}, better in {} {})",
            group_label(group),
            cmp.verdict,
            labels.0,
            cmp.prefer_first.len(),
            labels.1,
            cmp.prefer_second.len()
        );
        let _ = writeln!(out, "    rank deltas ({} -> {}): {}", labels.0, labels.1, histogram_line(&hist));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Histogram rendering

/// Static bar chart of a rank-change histogram. Negative deltas (students
/// moving up their own list) are drawn in green, positive in red, the
/// gained/lost-seat counters in blue and gray.
pub fn render_rank_histogram_svg(title: &str, hist: &RankChangeHistogram) -> String {
    struct Bar {
        label: String,
        count: usize,
        color: &'static str,
    }
    let mut bars: Vec<Bar> = hist
        .deltas
        .iter()
        .map(|(&delta, &count)| Bar {
            label: format!("{delta:+}"),
            count,
            color: if delta < 0 {
                "#2e7d32"
            } else if delta > 0 {
                "#c62828"
            } else {
                "#616161"
            },
        })
        .collect();
    if hist.gained_seat > 0 {
        bars.push(Bar { label: "gained".into(), count: hist.gained_seat, color: "#1565c0" });
    }
    if hist.lost_seat > 0 {
        bars.push(Bar { label: "lost".into(), count: hist.lost_seat, color: "#6a1b9a" });
    }

    let (width, height, margin, gap) = (640.0, 320.0, 40.0, 6.0);
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let max_count = bars.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let bar_w = if bars.is_empty() { plot_w } else { plot_w / bars.len() as f64 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>",
        width / 2.0
    );
    for (i, bar) in bars.iter().enumerate() {
        let h = plot_h * bar.count as f64 / max_count;
        let x = margin + i as f64 * bar_w + gap / 2.0;
        let y = margin + plot_h - h;
        let w = bar_w - gap;
        let _ = writeln!(
            svg,
            "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"{}\"/>",
            bar.color
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            x + w / 2.0,
            margin + plot_h + 14.0,
            bar.label
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            x + w / 2.0,
            y - 4.0,
            bar.count
        );
    }
    let _ = writeln!(
        svg,
        "  <line x1=\"{margin}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        margin + plot_h,
        width - margin,
        margin + plot_h
    );
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Selftest over bundled fixtures

pub struct FixtureCheck {
    pub fixture: String,
    pub mechanism: Mechanism,
    pub ok: bool,
    pub detail: String,
}

pub struct SelftestReport {
    pub checks: Vec<FixtureCheck>,
    pub text: String,
}

impl SelftestReport {
    pub fn ok(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.ok)
    }
}

fn first_difference(expected: &str, actual: &str) -> String {
    for (i, (e, a)) in expected.lines().zip(actual.lines()).enumerate() {
        if e != a {
            return format!("line {}: expected `{e}`, got `{a}`", i + 1);
        }
    }
    format!(
        "expected {} lines, got {}",
        expected.lines().count(),
        actual.lines().count()
    )
}

/// Runs every fixture directory under `dir` (sorted by name): loads its
/// market, runs each mechanism with an `expected_<key>.csv` file, and
/// compares the rendered matching byte for byte.
pub fn run_selftest(dir: &Path) -> Result<SelftestReport, IoError> {
    let mut fixtures: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join("students.csv").exists())
        .collect();
    fixtures.sort();

    let mut checks = Vec::new();
    for fixture in &fixtures {
        let name = fixture.file_name().unwrap_or_default().to_string_lossy().to_string();
        let market = load_market(
            &fixture.join("students.csv"),
            &fixture.join("schools.csv"),
            &QuotaPolicySource::File(fixture.join("reserves.csv")),
            0,
        )?;
        for mechanism in Mechanism::ALL {
            let expected_path = fixture.join(format!("expected_{}.csv", mechanism.key()));
            let Ok(expected) = std::fs::read_to_string(&expected_path) else {
                continue;
            };
            let run = run_mechanism(mechanism, &market.instance, &market.quotas)?;
            let seat_types = seat_types_for_run(&market.instance, &market.quotas, mechanism)?;
            let actual = render_matching_csv(
                &market.table,
                &market.records,
                &market.instance,
                &market.quotas,
                &run.matching,
                &seat_types,
            );
            let ok = actual == expected;
            let detail = if ok {
                "matches".to_string()
            } else {
                first_difference(&expected, &actual)
            };
            checks.push(FixtureCheck { fixture: name.clone(), mechanism, ok, detail });
        }
    }

    let mut text = String::new();
    for check in &checks {
        let _ = writeln!(
            text,
            "{} {} {}: {}",
            if check.ok { "ok  " } else { "FAIL" },
            check.fixture,
            check.mechanism.key(),
            check.detail
        );
    }
    let _ = writeln!(
        text,
        "{} of {} golden matchings reproduced",
        checks.iter().filter(|c| c.ok).count(),
        checks.len()
    );
    Ok(SelftestReport { checks, text })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use std::fs;
    use tempfile::TempDir;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, content).unwrap();
        path
    }

    fn three_schools() -> SchoolTable {
        SchoolTable::new(
            vec!["S".into(), "B".into(), "T".into()],
            vec!["Stuyvesant".into(), "Bronx Science".into(), "Brooklyn Tech".into()],
            vec![2, 2, 1],
        )
    }

    #[test]
    fn loads_well_formed_files() {
        let tmp = TempDir::new().unwrap();
        let schools = write(
            tmp.path(),
            "schools.csv",
            "code,name,quota\nS,Stuyvesant,2\nB,Bronx Science,2\nT,Brooklyn Tech,1\n",
        );
        let table = load_schools(&schools).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.resolve("B"), Some(1));
        assert_eq!(table.quotas, vec![2, 2, 1]);

        let students = write(
            tmp.path(),
            "students.csv",
            "id,score,disadvantaged,lottery,prefs\n\
             s1,98,false,,S|B|T\n\
             s2,95.5,true,7,B\n\
             s3,90,yes,,\n",
        );
        let records = load_students(&students, &table).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].prefs, vec![0, 1, 2]);
        assert_eq!(records[1].lottery, Some(7));
        assert!(records[2].disadvantaged);
        assert!(records[2].prefs.is_empty());
    }

    #[test]
    fn bad_rows_are_reported_with_line_numbers_and_good_rows_survive() {
        let tmp = TempDir::new().unwrap();
        let students = write(
            tmp.path(),
            "students.csv",
            "id,score,disadvantaged,lottery,prefs\n\
             s1,98,false,,S\n\
             s2,95,true,,Z|B\n\
             s3,90,false,,T\n",
        );
        let (records, errors) = load_students_lenient(&students, &three_schools()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 3);
        assert!(errors[0].message.contains("unknown school code `Z`"));

        assert!(matches!(
            load_students(&students, &three_schools()),
            Err(IoError::Rows { .. })
        ));
    }

    #[test]
    fn duplicate_ids_and_headers_are_rejected() {
        let tmp = TempDir::new().unwrap();
        let students = write(
            tmp.path(),
            "students.csv",
            "id,score,disadvantaged,lottery,prefs\ns1,98,false,,S\ns1,95,true,,B\n",
        );
        let (_, errors) = load_students_lenient(&students, &three_schools()).unwrap();
        assert!(errors[0].message.contains("duplicate student id"));

        let wrong = write(tmp.path(), "wrong.csv", "id,points\ns1,5\n");
        assert!(matches!(
            load_students(&wrong, &three_schools()),
            Err(IoError::Header { .. })
        ));
    }

    #[test]
    fn priority_orders_by_score_then_lottery() {
        let records = vec![
            StudentRecord { id: "id1".into(), score: 90.0, disadvantaged: false, lottery: Some(5), prefs: vec![] },
            StudentRecord { id: "id2".into(), score: 80.0, disadvantaged: false, lottery: Some(1), prefs: vec![] },
            StudentRecord { id: "id3".into(), score: 90.0, disadvantaged: true, lottery: Some(2), prefs: vec![] },
        ];
        let (priority, _) = build_priority(&records, 0).unwrap();
        assert_eq!(priority.order(), vec![2, 0, 1]);

        // Distinct scores: lottery numbers are irrelevant.
        let records = vec![
            StudentRecord { id: "x".into(), score: 50.0, disadvantaged: false, lottery: Some(999), prefs: vec![] },
            StudentRecord { id: "y".into(), score: 60.0, disadvantaged: false, lottery: Some(1), prefs: vec![] },
        ];
        let (priority, _) = build_priority(&records, 0).unwrap();
        assert_eq!(priority.order(), vec![1, 0]);
    }

    #[test]
    fn missing_lotteries_come_from_the_seed_and_avoid_provided_numbers() {
        let records = vec![
            StudentRecord { id: "a".into(), score: 90.0, disadvantaged: false, lottery: None, prefs: vec![] },
            StudentRecord { id: "b".into(), score: 90.0, disadvantaged: false, lottery: Some(3), prefs: vec![] },
            StudentRecord { id: "c".into(), score: 90.0, disadvantaged: false, lottery: None, prefs: vec![] },
        ];
        let (p1, l1) = build_priority(&records, 7).unwrap();
        let (p2, l2) = build_priority(&records, 7).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(l1, l2);
        assert_eq!(l1[1], 3);
        assert_ne!(l1[0], l1[2]);
        assert!(l1.iter().all(|&x| x == 3 || x > 1000), "u64 draws dwarf small provided numbers");
    }

    #[test]
    fn equal_score_and_lottery_is_a_collision() {
        let records = vec![
            StudentRecord { id: "a".into(), score: 90.0, disadvantaged: false, lottery: Some(3), prefs: vec![] },
            StudentRecord { id: "b".into(), score: 90.0, disadvantaged: false, lottery: Some(3), prefs: vec![] },
        ];
        let err = build_priority(&records, 0).unwrap_err();
        assert!(matches!(err, IoError::LotteryCollision { .. }));
        assert!(err.is_internal());
    }

    #[test]
    fn quota_policies_match_hand_arithmetic() {
        let students: Vec<Student> = (0..27855)
            .map(|s| Student {
                group: if s < 18723 { Group::Advantaged } else { Group::Disadvantaged },
                prefs: vec![],
            })
            .collect();
        let priority = PriorityOrder::from_ranked(&(0..27855).collect::<Vec<_>>());
        let instance = Instance::new(students, vec![School { quota: 635, priority }]);
        let table = SchoolTable::new(vec!["c1".into()], vec!["School 1".into()], vec![635]);

        let percent = apply_quota_policy(&QuotaPolicy::Percent(0.2), &instance, &table).unwrap();
        assert_eq!(percent.reserved(0), 127);
        let proportional =
            apply_quota_policy(&QuotaPolicy::Proportional, &instance, &table).unwrap();
        assert_eq!(proportional.reserved(0), 209);
        let zero = apply_quota_policy(&QuotaPolicy::Percent(0.0), &instance, &table).unwrap();
        assert_eq!(zero.reserved(0), 0);

        assert!(matches!(
            apply_quota_policy(&QuotaPolicy::Percent(1.5), &instance, &table),
            Err(IoError::PercentRange { .. })
        ));
        assert!(matches!(
            apply_quota_policy(&QuotaPolicy::Explicit(vec![700]), &instance, &table),
            Err(IoError::ReserveBound { .. })
        ));
        assert!(matches!(
            apply_quota_policy(&QuotaPolicy::Explicit(vec![1, 2]), &instance, &table),
            Err(IoError::ReserveCount { .. })
        ));
    }

    #[test]
    fn quota_flag_parsing() {
        assert_eq!(
            QuotaPolicy::parse_flag("percent:0.2").unwrap(),
            QuotaPolicySource::Policy(QuotaPolicy::Percent(0.2))
        );
        assert_eq!(
            QuotaPolicy::parse_flag("proportional").unwrap(),
            QuotaPolicySource::Policy(QuotaPolicy::Proportional)
        );
        assert_eq!(
            QuotaPolicy::parse_flag("file:reserves.csv").unwrap(),
            QuotaPolicySource::File(PathBuf::from("reserves.csv"))
        );
        assert!(QuotaPolicy::parse_flag("half").is_err());
        assert!(QuotaPolicy::parse_flag("percent:lots").is_err());
    }

    /// Writes one sample market to disk in file format and loads it back.
    fn market_files(sample: &samples::SampleMarket, dir: &Path) -> LoadedMarket {
        write_market(dir, &sample.instance, &sample.quotas, None).unwrap();
        load_market(
            &dir.join("students.csv"),
            &dir.join("schools.csv"),
            &QuotaPolicySource::File(dir.join("reserves.csv")),
            0,
        )
        .unwrap()
    }

    #[test]
    fn written_markets_reload_to_the_same_instance() {
        for sample in samples::all() {
            let tmp = TempDir::new().unwrap();
            let market = market_files(&sample, tmp.path());
            assert_eq!(market.instance.students(), sample.instance.students(), "{}", sample.name);
            for c in 0..sample.instance.num_schools() {
                assert_eq!(
                    market.instance.schools()[c].priority,
                    sample.instance.schools()[c].priority,
                    "{} school {c}",
                    sample.name
                );
                assert_eq!(market.quotas.reserved(c), sample.quotas.reserved(c));
            }
        }
    }

    #[test]
    fn potential_scores_reload_to_the_same_priority() {
        let config = crate::market::presets::nyc_like(500);
        let (instance, quotas, scores) =
            crate::market::gen_normal_potentials_with_scores(&config, 13);
        let tmp = TempDir::new().unwrap();
        write_market(tmp.path(), &instance, &quotas, Some(&scores)).unwrap();
        let market = load_market(
            &tmp.path().join("students.csv"),
            &tmp.path().join("schools.csv"),
            &QuotaPolicySource::File(tmp.path().join("reserves.csv")),
            99,
        )
        .unwrap();
        assert_eq!(
            market.instance.schools()[0].priority,
            instance.schools()[0].priority
        );
        assert_eq!(market.instance.students(), instance.students());
    }

    #[test]
    fn matching_files_round_trip() {
        let sample = samples::reserve_order_incomparable();
        let tmp = TempDir::new().unwrap();
        let market = market_files(&sample, tmp.path());
        for mechanism in Mechanism::ALL {
            let run = run_mechanism(mechanism, &market.instance, &market.quotas).unwrap();
            let seat_types =
                seat_types_for_run(&market.instance, &market.quotas, mechanism).unwrap();
            let rendered = render_matching_csv(
                &market.table,
                &market.records,
                &market.instance,
                &market.quotas,
                &run.matching,
                &seat_types,
            );
            let path = write(tmp.path(), "matching.csv", &rendered);
            let (parsed, parsed_seats) =
                parse_matching(&path, &market.table, &market.records, market.table.len())
                    .unwrap();
            assert_eq!(parsed, run.matching, "{}", mechanism.key());
            assert_eq!(parsed_seats, seat_types, "{}", mechanism.key());
        }
    }

    #[test]
    fn experiment_reports_are_deterministic_and_complete() {
        let sample = samples::discovery_unfair_blocking();
        let tmp = TempDir::new().unwrap();
        market_files(&sample, tmp.path());
        let out = tmp.path().join("out");
        let config = RunConfig {
            students_path: tmp.path().join("students.csv"),
            schools_path: tmp.path().join("schools.csv"),
            mechanisms: vec![
                Mechanism::Base,
                Mechanism::Discovery,
                Mechanism::MinorityReserve,
                Mechanism::JointSeats,
            ],
            policy: QuotaPolicySource::File(tmp.path().join("reserves.csv")),
            seed: 5,
            out_dir: Some(out.clone()),
            trace: true,
        };
        let first = run_experiment(&config).unwrap();
        let second = run_experiment(&config).unwrap();
        assert_eq!(first.text, second.text);
        assert!(!first.theorem_violated());

        assert!(first.text.contains("[base]"));
        assert!(first.text.contains("[base vs disc]"));
        assert!(first.text.contains("high competitiveness: holds"));
        assert!(first.text.contains("smart reserve: holds"));
        assert!(first.text.contains("trace general-seats"));
        assert!(first.text.contains("blocking pairs (within disadvantaged)"));

        // 4 matchings + 6 histograms + the report.
        assert_eq!(first.written.len(), 11);
        assert!(out.join("disc.matching.csv").exists());
        assert!(out.join("report.txt").exists());
        let svg = fs::read_to_string(out.join("rank-changes-base-disc-disadvantaged.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<rect"));
    }

    #[test]
    fn base_only_config_has_no_comparisons() {
        let sample = samples::reserves_rescue_everyone();
        let tmp = TempDir::new().unwrap();
        market_files(&sample, tmp.path());
        let config = RunConfig {
            students_path: tmp.path().join("students.csv"),
            schools_path: tmp.path().join("schools.csv"),
            mechanisms: vec![Mechanism::Base],
            policy: QuotaPolicySource::File(tmp.path().join("reserves.csv")),
            seed: 0,
            out_dir: None,
            trace: false,
        };
        let outcome = run_experiment(&config).unwrap();
        assert!(outcome.comparisons.is_empty());
        assert!(outcome.high_competitiveness.is_none());
        assert!(outcome.reserve_order.is_none());
        assert!(outcome.smart_reserve.is_some());
        assert!(!outcome.text.contains(" vs "));
    }

    #[test]
    fn audit_and_compare_describe_an_existing_matching() {
        let sample = samples::discovery_unfair_blocking();
        let tmp = TempDir::new().unwrap();
        let market = market_files(&sample, tmp.path());
        let disc = run_mechanism(Mechanism::Discovery, &market.instance, &market.quotas)
            .unwrap()
            .matching;
        let text = audit_matching(&market, &disc).unwrap();
        assert!(text.contains("blocking pairs (within disadvantaged): 1"), "{text}");
        assert!(text.contains("high competitiveness: fails"), "{text}");
        assert!(text.contains("smart reserve: holds"), "{text}");
        assert!(text.contains("vs a fresh plain run, disadvantaged: Incomparable"), "{text}");

        let base =
            run_mechanism(Mechanism::Base, &market.instance, &market.quotas).unwrap().matching;
        let text = compare_matchings(&market, &disc, &base, ("disc", "base")).unwrap();
        assert!(text.contains("comparing disc against base"));
        assert!(text.contains("disadvantaged: Incomparable"), "{text}");

        // An overfull matching is rejected before any analysis runs.
        let mut bad = base.assignments().to_vec();
        for slot in bad.iter_mut() {
            *slot = Some(0);
        }
        let bad = crate::model::Matching::from_assignments(bad, market.table.len());
        assert!(matches!(audit_matching(&market, &bad), Err(IoError::InvalidMarket(_))));
    }

    #[test]
    fn selftest_passes_on_a_generated_fixture_and_catches_tampering() {
        let tmp = TempDir::new().unwrap();
        let fixture = tmp.path().join("case-a");
        let sample = samples::discovery_hurts_everyone();
        let market = market_files(&sample, &fixture);
        for mechanism in Mechanism::ALL {
            let run = run_mechanism(mechanism, &market.instance, &market.quotas).unwrap();
            let seat_types =
                seat_types_for_run(&market.instance, &market.quotas, mechanism).unwrap();
            let rendered = render_matching_csv(
                &market.table,
                &market.records,
                &market.instance,
                &market.quotas,
                &run.matching,
                &seat_types,
            );
            fs::write(fixture.join(format!("expected_{}.csv", mechanism.key())), rendered)
                .unwrap();
        }
        let report = run_selftest(tmp.path()).unwrap();
        assert!(report.ok(), "{}", report.text);
        assert_eq!(report.checks.len(), 4);

        // Corrupt one golden file; the selftest must name the first bad line.
        let golden = fixture.join("expected_disc.csv");
        let tampered = fs::read_to_string(&golden).unwrap().replace("c1", "c2");
        fs::write(&golden, tampered).unwrap();
        let report = run_selftest(tmp.path()).unwrap();
        assert!(!report.ok());
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.ok).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].mechanism, Mechanism::Discovery);
        assert!(failed[0].detail.contains("line"));
    }
}
