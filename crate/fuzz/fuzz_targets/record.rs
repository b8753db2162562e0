#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    fock_sme_cli::fuzz_checks::check_record(data);
});
