fn main() {
    std::process::exit(atomtwin::cli::run_command(std::env::args_os()));
}
