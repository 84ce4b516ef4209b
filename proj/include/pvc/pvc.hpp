#pragma once

// Umbrella header.

#include "pvc/correction.hpp"
#include "pvc/dicom.hpp"
#include "pvc/dicom_series.hpp"
#include "pvc/errors.hpp"
#include "pvc/material.hpp"
#include "pvc/morphology.hpp"
#include "pvc/phantom.hpp"
#include "pvc/phantom_suite.hpp"
#include "pvc/raw_io.hpp"
#include "pvc/volume.hpp"
