#include "poecal/commands.hpp"

int main(int argc, char** argv) { return poecal::run_cli(argc, argv); }
