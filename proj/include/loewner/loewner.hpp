#pragma once

// Umbrella header.
#include "error.hpp"
#include "multi_index.hpp"
#include "monomial_table.hpp"
#include "poly_jet.hpp"
#include "jet_json.hpp"
#include "linalg.hpp"
#include "spectral.hpp"
#include "homological.hpp"
#include "evolution_family.hpp"
#include "sampling.hpp"
#include "normal_form.hpp"
#include "herglotz.hpp"
#include "loewner_chain.hpp"
#include "io.hpp"
