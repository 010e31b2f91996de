fn main() {
    std::process::exit(cavity_fort::cli::dispatch(std::env::args_os()));
}
