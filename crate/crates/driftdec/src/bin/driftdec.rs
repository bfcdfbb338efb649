fn main() {
    std::process::exit(driftdec::cli::run());
}
