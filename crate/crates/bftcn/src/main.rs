use clap::Parser;

fn main() {
    let cli = bftcn::cli::Cli::parse();
    if let Err(e) = bftcn::cli::run(cli) {
        // A downstream consumer hanging up (head, etc.) is not an error.
        if let Some(io) = e.downcast_ref::<std::io::Error>()
            && io.kind() == std::io::ErrorKind::BrokenPipe
        {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
