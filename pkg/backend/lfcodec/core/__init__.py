# Settings, errors and logging
