//! Parses a check-in file, sessionizes it, and inspects the result: split
//! sizes, vocabularies, time slots and the query samples built from it.

use pg2net::data::{
    build_queries, parse_records, slot_of, Dataset, DatasetMode, ParseOptions, QueryConfig, SessionConfig, Split,
};
use pg2net::synth::{random_corpus, write_records};

fn main() -> pg2net::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| pg2net::Error::io("tempdir", e))?;
    let path = dir.path().join("checkins.tsv");
    write_records(&path, &random_corpus(12, 40, 120, 3), DatasetMode::Checkin, true)?;

    let parsed = parse_records(&path, DatasetMode::Checkin, &ParseOptions { has_header: true, delimiter: None })?;
    println!("{} records, {} malformed lines", parsed.records.len(), parsed.malformed.len());
    let first = &parsed.records[0];
    println!("first record: {} at {} -> slot {}", first.location_id, first.time, slot_of(&first.time));

    let (ds, stats) = Dataset::preprocess(parsed.records, DatasetMode::Checkin, &SessionConfig::default());
    println!("{stats:#?}");
    for s in ds.user_sessions(0) {
        let span = s.visits.last().unwrap().time - s.visits[0].time;
        println!(
            "user {} session {} {:?}: {} visits over {:.1} h",
            s.user_id,
            s.session_index,
            s.split,
            s.visits.len(),
            span.num_minutes() as f64 / 60.0
        );
    }
    let train = build_queries(&ds, Split::Train, &QueryConfig::default());
    let test = build_queries(&ds, Split::Test, &QueryConfig::default());
    println!("{} train queries, {} test queries", train.len(), test.len());
    let q = &test[0];
    println!(
        "query {}: {} history visits, {} recent, target location {}",
        q.id,
        q.history.len(),
        q.recent.len(),
        q.target.location
    );
    let out = dir.path().join("sessions.jsonl");
    ds.save(&out)?;
    assert_eq!(Dataset::load(&out)?, ds);
    println!("saved and reloaded {}", out.display());
    Ok(())
}
