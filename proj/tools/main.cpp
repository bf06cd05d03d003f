// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/cli.hpp"

int main(int argc, char** argv) { return allo::cli::dispatch(argc, argv); }
