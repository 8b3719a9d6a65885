// Command-line front end. Subcommands land here as the library fills in.
#include <cstdio>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::puts("vaedim: no subcommands wired yet");
  return 0;
}
