fn main() {
    std::process::exit(shockprop::cli::run_command(std::env::args_os()));
}
