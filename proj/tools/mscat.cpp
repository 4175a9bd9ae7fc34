// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#include "mscat/cli.hpp"

int main(int argc, char **argv) { return mscat::cli::run(argc, argv); }
