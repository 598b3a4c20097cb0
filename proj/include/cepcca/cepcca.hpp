#pragma once

// Canonical correlation analysis between the log-spectra of multi-subject
// stationary time series and correlated static outcomes, via maximum Whittle
// likelihood cepstral estimation.

#include "cepcca/cca.hpp"
#include "cepcca/cepstral.hpp"
#include "cepcca/csv.hpp"
#include "cepcca/dataset.hpp"
#include "cepcca/errors.hpp"
#include "cepcca/parallel.hpp"
#include "cepcca/rng.hpp"
#include "cepcca/simulate.hpp"
#include "cepcca/spectral.hpp"

#define CEPCCA_VERSION "0.1.0"
