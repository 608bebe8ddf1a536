#![no_main]
use libfuzzer_sys::fuzz_target;
use opdet::config::SweepConfig;

fuzz_target!(|text: &str| {
    // anything accepted must survive a trip through its own text form
    let Ok(cfg) = SweepConfig::from_text(text) else {
        return;
    };
    let again = SweepConfig::from_text(&cfg.to_config_text()).expect("round trip parses");
    assert_eq!(again, cfg);
    let _ = cfg.alphas();
});
