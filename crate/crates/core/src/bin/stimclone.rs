fn main() {
    std::process::exit(stimclone::cli::run(std::env::args_os()));
}
