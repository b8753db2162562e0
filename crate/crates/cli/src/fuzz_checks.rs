//! Properties exercised by the fuzz targets and by the corpus smoke test.
//! Each check panics on a violated property and ignores rejected input.

use fock_sme::hierarchy::parse_snapshot;
use fock_sme::record::parse_record;

use crate::scenario::parse_scenario;

/// Any accepted scenario has a consistent grid and observables for its system.
pub fn check_scenario(text: &str) {
    if let Ok(loaded) = parse_scenario(text) {
        let sc = &loaded.scenario;
        assert!(sc.grid.dt > 0.0 && sc.grid.dt.is_finite());
        for o in &loaded.observables {
            assert!(o.validate(sc.system.dim()).is_ok());
        }
    }
}

/// Accepted records print to text that parses back to the same text.
pub fn check_record(text: &str) {
    if let Ok(rec) = parse_record(text) {
        let printed = rec.to_text();
        let again = parse_record(&printed).expect("printed record parses");
        assert_eq!(again.to_text(), printed);
        assert_eq!(again.entries.len(), rec.entries.len());
    }
}

/// Accepted snapshots print to text that parses back to the same text.
pub fn check_snapshot(text: &str) {
    if let Ok(h) = parse_snapshot(text) {
        let printed = h.to_snapshot();
        let again = parse_snapshot(&printed).expect("printed snapshot parses");
        assert_eq!(again.to_snapshot(), printed);
    }
}
