#![no_main]

use gsvin::evaluation::SweepConfig;
use gsvin_cli::commands::eval::EvalSettings;
use gsvin_cli::commands::heuristic::HeuristicSettings;
use gsvin_cli::commands::selfcheck::SelfcheckSettings;
use gsvin_cli::commands::train::TrainSettings;
use gsvin_cli::commands::DataSettings;
use gsvin_cli::config::{parse_config, Format};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for format in [Format::Toml, Format::Json] {
        let _ = parse_config::<DataSettings>(text, format, "generate");
        let _ = parse_config::<TrainSettings>(text, format, "train");
        let _ = parse_config::<EvalSettings>(text, format, "eval");
        if let Ok(s) = parse_config::<SweepConfig>(text, format, "sweep") {
            let _ = s.validate();
        }
        let _ = parse_config::<HeuristicSettings>(text, format, "heuristic");
        let _ = parse_config::<SelfcheckSettings>(text, format, "selfcheck");
    }
});
