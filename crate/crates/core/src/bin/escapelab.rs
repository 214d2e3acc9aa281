fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(carnot_lab::cli::cli_main(&args));
}
