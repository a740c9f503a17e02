# Makes the tests directory a package for helper imports.
